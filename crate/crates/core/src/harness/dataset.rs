use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use super::config::{DatasetKind, DatasetSpec};
use crate::data::{Dataset, Split};
use crate::error::{Error, Result};
use crate::nn::{SeededRng, Stream};

/// Gaussian class blobs: centres ~ N(0, I), samples ~ N(centre, spread² I),
/// shuffled. Exactly `samples_per_class` rows per class.
pub fn generate_synthetic<R: Rng + ?Sized>(spec: &DatasetSpec, rng: &mut R) -> Result<Dataset> {
    let (d, c, m) = (spec.features, spec.classes, spec.samples_per_class);
    if d == 0 || c < 2 {
        return Err(Error::config("synthetic data needs >= 1 feature and >= 2 classes"));
    }
    let centres = Array2::from_shape_simple_fn((c, d), || rng.sample::<f64, _>(StandardNormal));
    let mut order: Vec<usize> = (0..c * m).collect();
    order.shuffle(rng);
    let mut features = Array2::zeros((c * m, d));
    let mut labels = vec![0; c * m];
    for (row, &k) in order.iter().enumerate() {
        let class = k / m;
        labels[row] = class;
        for j in 0..d {
            let noise: f64 = rng.sample(StandardNormal);
            features[[row, j]] = centres[[class, j]] + spec.spread * noise;
        }
    }
    Dataset::new(features, labels, c)
}

/// Shuffles rows and cuts them into train/val/test by `fractions`.
pub fn split_dataset<R: Rng + ?Sized>(data: &Dataset, fractions: [f64; 3], rng: &mut R) -> Split {
    let n = data.len();
    let mut rows: Vec<usize> = (0..n).collect();
    rows.shuffle(rng);
    let n_train = ((fractions[0] * n as f64).round() as usize).min(n);
    let n_val = ((fractions[1] * n as f64).round() as usize).min(n - n_train);
    Split {
        train: data.select(&rows[..n_train]),
        val: data.select(&rows[n_train..n_train + n_val]),
        test: data.select(&rows[n_train + n_val..]),
    }
}

/// Reads a headered CSV. Every column except `label_column` is a numeric
/// feature; labels are integers, remapped to `0..C` in ascending order.
pub fn load_csv(path: &Path, label_column: &str, keep_labels: Option<&[i64]>) -> Result<Dataset> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::config(format!("dataset.path: cannot open {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::config(format!("{}: {e}", path.display())))?
        .clone();
    let label_idx = headers
        .iter()
        .position(|h| h.trim() == label_column)
        .ok_or_else(|| Error::config(format!("dataset.label_column: no column named '{label_column}'")))?;
    let feature_cols: Vec<usize> = (0..headers.len()).filter(|&i| i != label_idx).collect();
    if feature_cols.is_empty() {
        return Err(Error::config("dataset: csv has no feature columns"));
    }

    let mut values = Vec::new();
    let mut raw_labels = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let line = r + 2;
        let record = record.map_err(|e| Error::config(format!("{}: row {line}: {e}", path.display())))?;
        let label: i64 = record
            .get(label_idx)
            .map(str::trim)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::config(format!("row {line}, column '{label_column}': label is not an integer")))?;
        if keep_labels.is_some_and(|k| !k.contains(&label)) {
            continue;
        }
        for &c in &feature_cols {
            let cell = record.get(c).unwrap_or("").trim();
            let v: f64 = cell.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| {
                Error::config(format!("row {line}, column '{}': '{cell}' is not numeric", &headers[c]))
            })?;
            values.push(v);
        }
        raw_labels.push(label);
    }
    let mut classes: BTreeMap<i64, usize> = raw_labels.iter().map(|&l| (l, 0)).collect();
    for (i, v) in classes.values_mut().enumerate() {
        *v = i;
    }
    if classes.len() < 2 {
        return Err(Error::config("dataset: csv must contain at least 2 classes"));
    }
    let labels = raw_labels.iter().map(|l| classes[l]).collect();
    let features = Array2::from_shape_vec((raw_labels.len(), feature_cols.len()), values)
        .map_err(|e| Error::Data(e.to_string()))?;
    Dataset::new(features, labels, classes.len())
}

/// Z-scores every split with the training split's mean and standard
/// deviation. Constant features are only centred.
pub fn normalize(split: &mut Split) {
    let train = &split.train.features;
    if train.nrows() == 0 {
        return;
    }
    let mean = train.mean_axis(Axis(0)).expect("non-empty");
    let std: Array1<f64> = train.std_axis(Axis(0), 0.0).mapv(|s| if s > 0.0 { s } else { 1.0 });
    for ds in [&mut split.train, &mut split.val, &mut split.test] {
        ds.features -= &mean;
        ds.features /= &std;
    }
}

/// Generates or loads the configured dataset and splits it. Synthetic data
/// uses `spec.seed`, falling back to `run_seed`.
pub fn load_dataset(spec: &DatasetSpec, run_seed: u64) -> Result<Split> {
    let seed = spec.seed.unwrap_or(run_seed);
    let mut rng = SeededRng::new(seed, Stream::Data);
    match spec.kind {
        DatasetKind::Synthetic => {
            let data = generate_synthetic(spec, &mut rng)?;
            Ok(split_dataset(&data, spec.split, &mut rng))
        }
        DatasetKind::Csv => {
            let path = spec
                .path
                .as_deref()
                .ok_or_else(|| Error::config("dataset.path: required for csv datasets"))?;
            let data = load_csv(path, &spec.label_column, spec.keep_labels.as_deref())?;
            let mut split = split_dataset(&data, spec.split, &mut rng);
            normalize(&mut split);
            Ok(split)
        }
    }
}

pub fn write_csv(data: &Dataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.into()))?;
    let mut header: Vec<String> = (0..data.feature_count()).map(|j| format!("f{j}")).collect();
    header.push("label".into());
    w.write_record(&header).map_err(|e| Error::Io(e.into()))?;
    for (row, label) in data.features.rows().into_iter().zip(&data.labels) {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        rec.push(label.to_string());
        w.write_record(&rec).map_err(|e| Error::Io(e.into()))?;
    }
    w.flush()?;
    Ok(())
}
