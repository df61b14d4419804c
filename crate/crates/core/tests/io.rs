use std::path::Path;

use abig::autodiff::Matrix;
use abig::features::FeatureParams;
use abig::io::{
    dataset_from_features, dataset_from_synth, extract_features, read_cells_csv, read_features_csv, sidecar_path, write_cells_csv,
    write_dataset, write_features_csv, Checkpoint, IoError, Manifest, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
use abig::model::{ArchConfig, ParamList};
use abig::parallel::Exec;
use abig::synth::{default_spec, generate_dataset, DatasetSpec};
use abig::train::{single_split, train, Dataset, Sample, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tiny_spec() -> DatasetSpec {
    DatasetSpec { images_per_class: 2, grid_rows: 2, grid_cols: 2, ..default_spec() }
}

fn toy_dataset(per_class: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::new();
    for label in 0..3 {
        for k in 0..per_class {
            let features = Matrix::from_fn(4, 69, |_, j| (label * 69 + j) as f64 * 0.01 + rng.random_range(-0.5..0.5));
            samples.push(Sample { image_id: format!("img_{:04}", label * per_class + k), label, features });
        }
    }
    Dataset { class_names: vec!["a".into(), "b".into(), "c".into()], samples }
}

fn trained_checkpoint() -> Checkpoint {
    let ds = toy_dataset(5, 3);
    let arch = ArchConfig { gcn_dims: vec![6, 6], head_dims: vec![5], generator_dims: vec![4], ..ArchConfig::default() };
    let config = TrainConfig { arch, epochs: 2, batch_size: 3, ..TrainConfig::default() };
    let split = single_split(&ds.labels(), 0.2, 1).unwrap();
    let state = train(&ds, &split, &config, Exec::Sequential).unwrap();
    Checkpoint { config, class_names: ds.class_names.clone(), split: Some(split), state }
}

#[test]
fn checkpoint_round_trip_is_bitwise() {
    let ck = trained_checkpoint();
    assert_eq!(ck.state.history.len(), 2);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.bin");
    ck.save(&path).unwrap();
    assert!(sidecar_path(&path).exists());
    let back = Checkpoint::load(&path).unwrap();
    assert_eq!(back, ck);
    for (a, b) in ck.state.theta.tensors().iter().zip(back.state.theta.tensors()) {
        let bits = |m: &Matrix| m.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(a), bits(b));
    }
    assert_eq!(back.to_bytes(), ck.to_bytes());
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(&bytes[..8], CHECKPOINT_MAGIC);
}

#[test]
fn flipped_byte_is_rejected() {
    let bytes = trained_checkpoint().to_bytes();
    for pos in [20, bytes.len() / 2, bytes.len() - 1] {
        let mut bad = bytes.clone();
        bad[pos] ^= 0x40;
        match Checkpoint::from_bytes(&bad, Path::new("x.bin")) {
            Err(IoError::Checkpoint { .. }) => {}
            other => panic!("byte {pos}: expected a checkpoint error, got {other:?}"),
        }
    }
    let truncated = &bytes[..bytes.len() - 40];
    assert!(matches!(Checkpoint::from_bytes(truncated, Path::new("x.bin")), Err(IoError::Checkpoint { .. })));
    assert!(matches!(Checkpoint::from_bytes(b"hello", Path::new("x.bin")), Err(IoError::Checkpoint { .. })));
}

#[test]
fn other_version_is_reported() {
    let mut bytes = trained_checkpoint().to_bytes();
    bytes[8..12].copy_from_slice(&(CHECKPOINT_VERSION + 1).to_le_bytes());
    match Checkpoint::from_bytes(&bytes, Path::new("x.bin")) {
        Err(IoError::VersionMismatch { found, expected, .. }) => {
            assert_eq!((found, expected), (CHECKPOINT_VERSION + 1, CHECKPOINT_VERSION));
        }
        other => panic!("expected a version mismatch, got {other:?}"),
    }
}

#[test]
fn cells_csv_round_trip() {
    let spec = tiny_spec();
    let images = generate_dataset(&spec, Exec::Sequential).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cells.csv");
    write_cells_csv(&path, &images[0]).unwrap();
    let back = read_cells_csv(&path).unwrap();
    assert_eq!(back.len(), images[0].patches.len());
    for p in &images[0].patches {
        assert_eq!(back[&p.patch_id], p.cells, "patch {}", p.patch_id);
    }
}

#[test]
fn malformed_cells_report_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cells.csv");
    let header = "patch_id,cx,cy,a01,a02,a03,a04,a05,a06,a07,a08,a09,a10,a11,a12";
    let good = "0,1.5,2.5,1,1,1,1,1,1,1,1,1,1,1,1";
    let bad = "0,1.5,oops,1,1,1,1,1,1,1,1,1,1,1,1";
    std::fs::write(&path, format!("{header}\n{good}\n{good}\n{bad}\n")).unwrap();
    match read_cells_csv(&path) {
        Err(IoError::Malformed { line, .. }) => assert_eq!(line, 4),
        other => panic!("expected malformed, got {other:?}"),
    }
    let nan = "0,1.5,NaN,1,1,1,1,1,1,1,1,1,1,1,1";
    std::fs::write(&path, format!("{header}\n{nan}\n")).unwrap();
    assert!(matches!(read_cells_csv(&path), Err(IoError::Malformed { line: 2, .. })));
    std::fs::write(&path, format!("{header}\n0,1,2\n")).unwrap();
    assert!(matches!(read_cells_csv(&path), Err(IoError::Malformed { .. })));
    std::fs::write(&path, "id,x,y\n").unwrap();
    assert!(matches!(read_cells_csv(&path), Err(IoError::Malformed { line: 1, .. })));
    assert!(matches!(read_cells_csv(&dir.path().join("missing.csv")), Err(IoError::Io { .. })));
}

#[test]
fn dataset_files_are_reproducible() {
    let spec = tiny_spec();
    let images = generate_dataset(&spec, Exec::Parallel).unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ma = write_dataset(a.path(), &spec, &images).unwrap();
    let mb = write_dataset(b.path(), &spec, &generate_dataset(&spec, Exec::Sequential).unwrap()).unwrap();
    assert_eq!(ma, mb);
    assert_eq!(ma.images.len(), 6);
    assert_eq!(ma.images[0].patches.len(), 4);
    let read = |d: &Path, rel: &str| std::fs::read(d.join(rel)).unwrap();
    assert_eq!(read(a.path(), "manifest.json"), read(b.path(), "manifest.json"));
    for img in &ma.images {
        assert_eq!(read(a.path(), &img.cells), read(b.path(), &img.cells), "{}", img.image_id);
    }
    assert_eq!(Manifest::read(&a.path().join("manifest.json")).unwrap(), ma);
}

#[test]
fn features_match_in_memory_path_and_round_trip() {
    let spec = tiny_spec();
    let images = generate_dataset(&spec, Exec::Parallel).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_dataset(dir.path(), &spec, &images).unwrap();
    let params = FeatureParams::default();
    let rows = extract_features(&manifest, dir.path(), params, Exec::Parallel).unwrap();
    assert_eq!(rows, extract_features(&manifest, dir.path(), params, Exec::Sequential).unwrap());
    assert_eq!(rows.len(), 24);
    let path = dir.path().join("features.csv");
    write_features_csv(&path, &rows).unwrap();
    let back = read_features_csv(&path).unwrap();
    for (x, y) in rows.iter().zip(&back) {
        assert_eq!((&x.image_id, x.patch_id, x.row, x.col), (&y.image_id, y.patch_id, y.row, y.col));
        let bits = |v: &[f64]| v.iter().map(|f| f.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&x.values), bits(&y.values));
    }
    let from_files = dataset_from_features(&manifest, &back, &path).unwrap();
    let names = manifest.class_names.clone();
    let in_memory = dataset_from_synth(&images, names, params, Exec::Sequential).unwrap();
    assert_eq!(from_files, in_memory);

    let mut extra = back.clone();
    extra[0].image_id = "stranger".into();
    assert!(matches!(dataset_from_features(&manifest, &extra, &path), Err(IoError::Invalid { .. })));
}

#[test]
fn manifest_validation() {
    let spec = tiny_spec();
    let images = generate_dataset(&spec, Exec::Parallel).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_dataset(dir.path(), &spec, &images).unwrap();
    let p = Path::new("m.json");
    assert!(manifest.validate(p).is_ok());
    let mut dup = manifest.clone();
    dup.images[1].image_id = dup.images[0].image_id.clone();
    assert!(matches!(dup.validate(p), Err(IoError::Invalid { .. })));
    let mut label = manifest.clone();
    label.images[0].label = 7;
    assert!(matches!(label.validate(p), Err(IoError::Invalid { .. })));
    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, "{ not json").unwrap();
    assert!(matches!(Manifest::read(&broken), Err(IoError::Json { .. })));
}
