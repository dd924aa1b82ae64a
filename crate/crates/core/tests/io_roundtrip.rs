use std::fs;
use std::path::Path;

use proptest::prelude::*;
use rankshift::io::{self, npy, text, FileFormat, NpyDtype, ReferenceSource};
use rankshift::{Error, ErrorKind, LabelVector, PredictionMatrix};

fn matrix() -> impl Strategy<Value = PredictionMatrix> {
    (1usize..20, 2usize..8).prop_flat_map(|(n, k)| {
        prop::collection::vec(1e-9f64..1.0, n * k).prop_map(move |raw| {
            let rows: Vec<Vec<f64>> = raw
                .chunks(k)
                .map(|r| {
                    let s: f64 = r.iter().sum();
                    r.iter().map(|v| v / s).collect()
                })
                .collect();
            PredictionMatrix::from_rows("m", &rows).unwrap()
        })
    })
}

fn write(dir: &Path, name: &str, body: &str) {
    fs::write(dir.join(name), body).unwrap();
}

proptest! {
    #[test]
    fn binary_round_trip_is_exact(p in matrix()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.npy");
        io::write_prediction_matrix(&path, &p, FileFormat::BinaryArrayV1).unwrap();
        let back = io::load_prediction_matrix(&path, FileFormat::BinaryArrayV1).unwrap();
        prop_assert_eq!(back.data(), p.data());
    }

    #[test]
    fn text_round_trip_within_1e12(p in matrix()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        io::write_prediction_matrix(&path, &p, FileFormat::DelimitedText).unwrap();
        let back = io::load_prediction_matrix(&path, FileFormat::DelimitedText).unwrap();
        prop_assert_eq!((back.rows(), back.cols()), (p.rows(), p.cols()));
        for (a, b) in back.data().iter().zip(p.data()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn validation_is_idempotent(p in matrix()) {
        let again = PredictionMatrix::new("m", p.rows(), p.cols(), p.data().to_vec()).unwrap();
        prop_assert_eq!(again.data(), p.data());
        for row in again.iter_rows() {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn subset_restriction_is_stochastic(p in matrix(), pick in prop::collection::vec(any::<bool>(), 8)) {
        let subset: Vec<usize> = (0..p.cols()).filter(|&c| pick[c]).collect();
        prop_assume!(subset.len() >= 2);
        let q = io::restrict_to_subset(&p, &subset).unwrap();
        prop_assert_eq!(q.cols(), subset.len());
        for row in q.iter_rows() {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            prop_assert!(row.iter().all(|&v| v >= 0.0));
        }
    }
}

#[test]
fn reads_numpy_float32() {
    let bytes = include_bytes!("fixtures/numpy_f4.npy");
    let arr = npy::decode(bytes).unwrap();
    assert_eq!(arr.shape, (2, 2));
    assert_eq!(arr.data, vec![0.25, 0.75, 0.5, 0.5]);
}

#[test]
fn float32_export_drift_is_renormalized() {
    let data = [0.1f32, 0.2, 0.7, 0.3, 0.3, 0.4];
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.npy");
    let widened: Vec<f64> = data.iter().map(|&v| v as f64).collect();
    fs::write(&path, npy::encode(2, 3, &widened, NpyDtype::F32)).unwrap();
    let p = io::load_prediction_matrix(&path, FileFormat::BinaryArrayV1).unwrap();
    for row in p.iter_rows() {
        assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    }
}

#[test]
fn text_dialects_are_rejected() {
    for bad in ["0.5;0.5\n", "0.5,0.5\r\n", "a,b\n0.5,0.5\n", "0.5, 0.5\n"] {
        assert!(matches!(text::decode(bad).unwrap_err(), Error::Parse { .. }), "{bad:?}");
    }
    assert!(matches!(text::decode("0.5,0.5\n1.0\n").unwrap_err(), Error::Shape(_)));
}

#[test]
fn load_errors_carry_the_path() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "bad.csv", "0.5,0.6\n");
    let err = io::load_prediction_matrix(&dir.path().join("bad.csv"), FileFormat::DelimitedText).unwrap_err();
    assert!(err.to_string().contains("bad.csv"));
    assert!(matches!(err.root(), Error::RowSumOutOfTolerance { row: 0, .. }));
    assert_eq!(err.kind(), ErrorKind::Input);
}

#[test]
fn labels_round_trip_and_reject_negatives() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("y.txt");
    let y = LabelVector::new(vec![0, 3, 1, 2]).unwrap();
    io::write_labels(&path, &y).unwrap();
    assert_eq!(io::load_labels(&path).unwrap(), y);
    write(dir.path(), "neg.txt", "1\n-2\n");
    let err = io::load_labels(&dir.path().join("neg.txt")).unwrap_err();
    assert!(matches!(err.root(), Error::NegativeLabel { line: 2, value: -2 }));
}

fn pool_dir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "a.csv", "0.6,0.4\n0.3,0.7\n");
    write(dir.path(), "b.csv", "0.9,0.1\n0.5,0.5\n");
    write(dir.path(), "y.txt", "0\n1\n");
    dir
}

#[test]
fn manifest_resolves_relative_paths() {
    let dir = pool_dir();
    let json = r#"{"models":[{"id":"a","path":"a.csv","format":"csv"},{"id":"b","path":"b.csv","format":"csv"}],
        "reference":{"class_distribution":[0.5,0.5]},"labels":"y.txt"}"#;
    let m = io::PoolManifest::from_json(json, dir.path()).unwrap();
    assert_eq!(m.models[1].prediction_path, dir.path().join("b.csv"));
    assert_eq!(m.reference, Some(ReferenceSource::ClassDistribution(vec![0.5, 0.5])));

    let back = io::PoolManifest::from_json(&m.to_json(dir.path()).unwrap(), dir.path()).unwrap();
    assert_eq!(back, m);
}

#[test]
fn manifest_errors() {
    let dir = pool_dir();
    let parse = |json: &str| io::PoolManifest::from_json(json, dir.path()).unwrap_err();

    let dup = parse(r#"{"models":[{"id":"a","path":"a.csv","format":"csv"},{"id":"a","path":"b.csv","format":"csv"}]}"#);
    assert!(matches!(dup, Error::DuplicateModelId(ref id) if id == "a"));

    let both = parse(
        r#"{"models":[{"id":"a","path":"a.csv","format":"csv"}],
            "reference":{"path":"b.csv","format":"csv","class_distribution":[0.5,0.5]}}"#,
    );
    assert!(matches!(both, Error::Schema(_)));

    let missing = parse(r#"{"models":[{"id":"a","path":"nope.npy","format":"npy"}]}"#);
    assert!(matches!(missing, Error::MissingFile(ref p) if p.ends_with("nope.npy")));

    let unknown_field = parse(r#"{"models":[{"id":"a","path":"a.csv","format":"csv"}],"extra":1}"#);
    assert!(matches!(unknown_field, Error::Schema(_)));

    let empty_subset = parse(r#"{"models":[{"id":"a","path":"a.csv","format":"csv"}],"class_subset":[]}"#);
    assert!(matches!(empty_subset, Error::EmptySubset));

    for e in [dup, both, missing, unknown_field, empty_subset] {
        assert_eq!(e.kind(), ErrorKind::Input);
    }
}
