use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use num_complex::Complex32;
use proptest::prelude::*;
use radarbeam::dataset::{read_dataset, write_dataset, DatasetError, DatasetHeader, Sample, SampleMeta};
use radarbeam::dsp::FeatureKind;
use radarbeam::lut::{fit_lut_pixels, LookupTable, LutError};
use radarbeam::nn::{build_model, read_checkpoint, write_checkpoint, Variant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CUBE: [usize; 3] = [2, 4, 4];

fn samples(n: usize, seed: u64) -> Vec<Sample> {
    let mut g = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let mut features = BTreeMap::new();
            features.insert(FeatureKind::RA4, (0..16).map(|_| g.random::<f32>()).collect());
            features.insert(FeatureKind::RangeVelocity, (0..16).map(|_| g.random_range(-2.0f32..2.0)).collect());
            Sample {
                meta: SampleMeta {
                    label: g.random_range(0..64),
                    scene_seed: g.random(),
                    timestamp_index: i as u64,
                    ..Default::default()
                },
                raw: Some((0..32).map(|_| Complex32::new(g.random(), g.random())).collect()),
                features,
            }
        })
        .collect()
}

fn header() -> DatasetHeader {
    DatasetHeader { cube_shape: CUBE, n_beams: 64, split: Some(Default::default()), ..Default::default() }
}

fn bits(values: &[f32]) -> Vec<u32> {
    values.iter().map(|v| v.to_bits()).collect()
}

#[test]
fn dataset_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ds");
    let data = samples(30, 1);
    write_dataset(&path, header(), &data).unwrap();
    let ds = read_dataset(&path).unwrap();
    assert_eq!(ds.len(), data.len());
    for (i, s) in data.iter().enumerate() {
        assert_eq!(ds.samples[i].label, s.meta.label);
        assert_eq!(ds.samples[i].scene_seed, s.meta.scene_seed);
        for (kind, values) in &s.features {
            assert_eq!(bits(ds.feature(*kind).unwrap().sample(i)), bits(values));
        }
        assert_eq!(&ds.raw_cube_f32(i).unwrap(), s.raw.as_ref().unwrap());
    }
}

#[test]
fn writing_into_an_existing_dataset_fails() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ds");
    let data = samples(3, 2);
    write_dataset(&path, header(), &data).unwrap();
    assert!(matches!(write_dataset(&path, header(), &data), Err(DatasetError::AlreadyExists(_))));
}

#[test]
fn missing_manifest_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(read_dataset(dir.path()), Err(DatasetError::Io { .. })));
}

fn corrupt_and_read(dir: &Path, file: &str, edit: impl FnOnce(&mut Vec<u8>)) -> Result<(), DatasetError> {
    let path = dir.join(file);
    let pristine = fs::read(&path).unwrap();
    let mut bytes = pristine.clone();
    edit(&mut bytes);
    fs::write(&path, &bytes).unwrap();
    let result = read_dataset(dir).map(|_| ());
    fs::write(&path, &pristine).unwrap();
    result
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn any_byte_flip_in_a_checked_file_is_rejected(
        file in prop::sample::select(vec!["records.bin", "features-ra4.bin", "features-rv.bin"]),
        pos in any::<prop::sample::Index>(),
        mask in 1u8..=255,
    ) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds");
        write_dataset(&path, header(), &samples(8, 3)).unwrap();
        let result = corrupt_and_read(&path, file, |b| {
            let i = pos.index(b.len());
            b[i] ^= mask;
        });
        prop_assert!(result.is_err());
    }

    #[test]
    fn any_truncation_is_rejected(
        file in prop::sample::select(vec!["records.bin", "raw.bin", "features-ra4.bin"]),
        cut in any::<prop::sample::Index>(),
    ) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds");
        write_dataset(&path, header(), &samples(8, 4)).unwrap();
        let result = corrupt_and_read(&path, file, |b| b.truncate(cut.index(b.len())));
        prop_assert!(result.is_err());
    }
}

#[test]
fn checkpoints_round_trip_for_every_variant() {
    for (seed, variant) in Variant::ALL.into_iter().enumerate() {
        let model = build_model(variant, seed as u64);
        let mut bytes = Vec::new();
        write_checkpoint(&model, &mut bytes).unwrap();
        let loaded = read_checkpoint(bytes.as_slice()).unwrap();
        assert_eq!(loaded.input_shape(), model.input_shape());
        assert_eq!(loaded.param_count(), model.param_count());
        for (a, b) in model.params().iter().zip(loaded.params()) {
            assert_eq!(bits(a), bits(b), "{variant}");
        }
        let mut again = Vec::new();
        write_checkpoint(&loaded, &mut again).unwrap();
        assert_eq!(again, bytes, "{variant}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn corrupted_checkpoints_never_load(pos in any::<prop::sample::Index>(), mask in 1u8..=255, cut: bool) {
        let model = build_model(Variant::Ra4, 1);
        let mut bytes = Vec::new();
        write_checkpoint(&model, &mut bytes).unwrap();
        let i = pos.index(bytes.len());
        if cut {
            bytes.truncate(i);
        } else {
            bytes[i] ^= mask;
        }
        prop_assert!(read_checkpoint(bytes.as_slice()).is_err());
    }
}

fn small_lut() -> LookupTable {
    fit_lut_pixels([8, 4], 16, &[(0, 3), (0, 3), (5, 9), (17, 1), (31, 15), (17, 2)]).unwrap()
}

#[test]
fn lut_round_trip_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("table.lut");
    let lut = small_lut();
    lut.save(&path).unwrap();
    let loaded = LookupTable::load(&path).unwrap();
    assert_eq!(loaded, lut);
    let map: Vec<f32> = (0..32).map(|i| ((i * 7) % 32) as f32).collect();
    assert_eq!(loaded.predict_values(&map, 16).unwrap(), lut.predict_values(&map, 16).unwrap());
}

#[test]
fn lut_rejects_truncation_and_bad_fields() {
    let mut bytes = Vec::new();
    small_lut().write_to(&mut bytes).unwrap();
    for len in 0..bytes.len() {
        assert!(matches!(LookupTable::read_from(&bytes[..len]), Err(LutError::BadFormat(_))), "length {len}");
    }
    let mut extra = bytes.clone();
    extra.push(0);
    assert!(LookupTable::read_from(extra.as_slice()).is_err());
    let mut version = bytes.clone();
    version[8] = 2;
    assert!(LookupTable::read_from(version.as_slice()).is_err());
    // Last fallback entry pointed at a beam that does not exist.
    let mut beam = bytes.clone();
    let n = beam.len();
    beam[n - 2..].copy_from_slice(&99u16.to_le_bytes());
    assert!(LookupTable::read_from(beam.as_slice()).is_err());
    // A repeated fallback beam.
    let mut repeat = bytes;
    let first = [repeat[n - 32], repeat[n - 31]];
    repeat[n - 2..].copy_from_slice(&first);
    assert!(LookupTable::read_from(repeat.as_slice()).is_err());
}
