use camel::dataset::{parse_features, parse_labels};
use camel::{kfold_split, load_dataset, Dataset, Matrix};
use proptest::prelude::*;

fn write(dir: &std::path::Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

proptest! {
    #[test]
    fn folds_partition_the_instances(n in 2usize..200, k_frac in 0.0f64..1.0, seed in any::<u64>()) {
        let k = 2 + ((n - 2) as f64 * k_frac) as usize;
        let split = kfold_split(n, k, seed).unwrap();
        let mut seen = vec![0usize; n];
        for f in 0..k {
            let test = split.test_indices(f);
            prop_assert!(!test.is_empty());
            for &i in &test { seen[i] += 1; }
            let train = split.train_indices(f);
            prop_assert_eq!(train.len() + test.len(), n);
            prop_assert!(train.iter().all(|i| !test.contains(i)));
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
        let sizes = split.fold_sizes();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        prop_assert_eq!(kfold_split(n, k, seed).unwrap(), split);
    }

    #[test]
    fn dataset_round_trips_bit_exactly(
        n in 1usize..20,
        d in 1usize..6,
        q in 2usize..6,
        vals in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO, 120),
        bits in prop::collection::vec(any::<bool>(), 120),
        named in any::<bool>(),
    ) {
        let features = Matrix::from_fn(n, d, |i, j| vals[(i * d + j) % vals.len()]);
        let labels = Matrix::from_fn(n, q, |i, j| if bits[(i * q + j) % bits.len()] { 1.0 } else { -1.0 });
        let names = named.then(|| (0..q).map(|j| format!("label{j}")).collect());
        let ds = Dataset::new(features, labels, names).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (fp, lp) = (dir.path().join("x.txt"), dir.path().join("y.txt"));
        ds.save(&fp, &lp).unwrap();
        let back: Dataset<f64> = load_dataset(&fp, &lp).unwrap();
        prop_assert_eq!(
            back.features().as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            ds.features().as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        prop_assert_eq!(back, ds);
    }
}

#[test]
fn split_examples() {
    let one_each = kfold_split(10, 10, 3).unwrap();
    assert!(one_each.fold_sizes().iter().all(|&s| s == 1));
    let mut sizes = kfold_split(5, 2, 0).unwrap().fold_sizes();
    sizes.sort();
    assert_eq!(sizes, vec![2, 3]);
    assert_eq!(kfold_split(100, 10, 7).unwrap(), kfold_split(100, 10, 7).unwrap());
    assert!(kfold_split(5, 1, 0).is_err());
    assert!(kfold_split(5, 6, 0).is_err());
}

#[test]
fn load_examples() {
    let dir = tempfile::tempdir().unwrap();
    let x = write(dir.path(), "x.txt", "1 2\n3 4\n");
    let ones = write(dir.path(), "ones.txt", "1,1\n1,1\n");
    let ds: Dataset<f64> = load_dataset(&x, &ones).unwrap();
    assert!(ds.labels().as_slice().iter().all(|&v| v == 1.0));
    assert_eq!(ds.describe().cardinality, 2.0);

    let binary = write(dir.path(), "bin.txt", "#labels a,b\n0,1\n1,0\n");
    let ds: Dataset<f64> = load_dataset(&x, &binary).unwrap();
    assert_eq!(ds.labels().as_slice(), &[-1.0, 1.0, 1.0, -1.0]);
    assert_eq!(ds.names().unwrap(), &["a".to_string(), "b".to_string()]);

    let three = write(dir.path(), "x3.txt", "1 2\n3 4\n5 6\n");
    let err = load_dataset::<f64>(&three, &ones).unwrap_err();
    assert_eq!(err.class(), camel::ErrorClass::DimensionMismatch);

    assert!(parse_labels::<f64>("1,2\n").is_err());
    assert!(parse_labels::<f64>("1,-1\n#labels a,b\n").is_err());
    assert!(parse_features::<f64>("1,x\n").is_err());
    assert!(parse_features::<f64>("").is_err());
    assert!(parse_features::<f64>("1,2\n3\n").is_err());
    let x_nan = write(dir.path(), "nan.txt", "1 NaN\n3 4\n");
    assert!(load_dataset::<f64>(&x_nan, &ones).is_err());
}

#[test]
fn cardinality_examples() {
    let x = Matrix::zeros(3, 2);
    let neg = Dataset::new(x.clone(), Matrix::filled(3, 4, -1.0), None).unwrap();
    assert_eq!(neg.describe().cardinality, 0.0);
    let pos = Dataset::new(x, Matrix::filled(3, 4, 1.0), None).unwrap();
    assert_eq!(pos.describe().cardinality, 4.0);
    assert_eq!(pos.subset(&[2, 0]).unwrap().n_instances(), 2);
}
