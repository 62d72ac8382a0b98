//! Datasets: synthetic 4-Gaussian generation, CSV files, train/test
//! splitting, class balancing, and the range/mean normalization transform.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A labeled binary-classification dataset. Rows of `x` are instances,
/// columns are named features; labels are 0/1.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub y: Array1<u8>,
    pub feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(x: Array2<f64>, y: Array1<u8>, feature_names: Vec<String>) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(Error::TrainingData("empty dataset".into()));
        }
        if x.nrows() != y.len() {
            return Err(Error::LengthMismatch {
                left: x.nrows(),
                right: y.len(),
            });
        }
        if feature_names.len() != x.ncols() {
            return Err(Error::LengthMismatch {
                left: feature_names.len(),
                right: x.ncols(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dataset feature".into()));
        }
        if y.iter().any(|&l| l > 1) {
            return Err(Error::TrainingData("labels must be 0 or 1".into()));
        }
        Ok(Dataset { x, y, feature_names })
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_features(&self) -> usize {
        self.x.ncols()
    }

    /// (count of label 0, count of label 1).
    pub fn class_counts(&self) -> (usize, usize) {
        let ones = self.y.iter().filter(|&&l| l == 1).count();
        (self.y.len() - ones, ones)
    }

    pub fn labels_f64(&self) -> Array1<f64> {
        self.y.mapv(f64::from)
    }

    /// New dataset holding the given rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> Dataset {
        let x = self.x.select(ndarray::Axis(0), rows);
        let y = Array1::from_iter(rows.iter().map(|&i| self.y[i]));
        Dataset {
            x,
            y,
            feature_names: self.feature_names.clone(),
        }
    }
}

/// Component means of the default synthetic task: four corners in XOR
/// arrangement. Components at even positions carry label 1 (the
/// equal-sign corners), odd positions label 0.
pub const DEFAULT_MEANS: [[f64; 2]; 4] = [[2.0, 2.0], [-2.0, 2.0], [-2.0, -2.0], [2.0, -2.0]];
/// Default component spread, calibrated so a well-trained network's test
/// accuracy peaks just above 94% (see scripts/calibrate_sigma.sh).
pub const DEFAULT_SIGMA: f64 = 1.05;

const COMPONENT_LABELS: [u8; 4] = [1, 0, 1, 0];

/// Draw `n` points from four isotropic bivariate normals in XOR class
/// arrangement. Rows cycle through the components in order (so row `j`
/// belongs to component `j mod 4`), keeping any prefix nearly balanced.
/// Deterministic per seed.
pub fn gen_synthetic(n: usize, seed: u64, means: &[[f64; 2]; 4], sigma: f64) -> Result<Dataset> {
    if n < 4 {
        return Err(Error::InvalidParameter(format!(
            "need at least 4 points, got {n}"
        )));
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    let normal = Normal::new(0.0, sigma).expect("sigma validated");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Array2::zeros((n, 2));
    let mut y = Array1::zeros(n);
    for j in 0..n {
        let comp = j % 4;
        x[[j, 0]] = means[comp][0] + normal.sample(&mut rng);
        x[[j, 1]] = means[comp][1] + normal.sample(&mut rng);
        y[j] = COMPONENT_LABELS[comp];
    }
    Dataset::new(x, y, vec!["x1".into(), "x2".into()])
}

/// Shuffle and split into disjoint train/test parts with
/// `round(n · train_fraction)` training rows. Deterministic per seed.
pub fn split(data: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "train fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    let n = data.len();
    let n_train = (n as f64 * train_fraction).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::InvalidParameter(format!(
            "degenerate split: {n_train} train / {} test rows",
            n - n_train
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok((data.select(&order[..n_train]), data.select(&order[n_train..])))
}

/// Subsample the majority class without replacement down to the minority
/// count. Kept rows stay in their original order. Deterministic per seed.
pub fn balance_classes(data: &Dataset, seed: u64) -> Result<Dataset> {
    let (n0, n1) = data.class_counts();
    if n0 == 0 || n1 == 0 {
        return Err(Error::TrainingData(
            "cannot balance a single-class dataset".into(),
        ));
    }
    if n0 == n1 {
        return Ok(data.clone());
    }
    let (majority_label, keep) = if n0 > n1 { (0, n1) } else { (1, n0) };
    let mut majority_rows: Vec<usize> = (0..data.len())
        .filter(|&i| data.y[i] == majority_label)
        .collect();
    majority_rows.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    majority_rows.truncate(keep);
    let mut rows: Vec<usize> = (0..data.len())
        .filter(|&i| data.y[i] != majority_label)
        .chain(majority_rows)
        .collect();
    rows.sort_unstable();
    Ok(data.select(&rows))
}

/// The §-style normalization `X' = D(X − B)`: per-feature mean centering
/// followed by 2/range scaling. Fit on training data only; the same affine
/// map is applied to any later data. Values may fall slightly outside
/// [−1, 1] because centering uses the mean, not the midrange.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub scale: Array1<f64>,
    pub center: Array1<f64>,
    pub feature_names: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct NormalizerJson {
    scale: Vec<f64>,
    center: Vec<f64>,
    feature_names: Vec<String>,
}

impl Normalizer {
    pub fn fit(train: &Dataset) -> Result<Self> {
        let m = train.num_features();
        let mut scale = Array1::zeros(m);
        let mut center = Array1::zeros(m);
        for j in 0..m {
            let col = train.x.column(j);
            let (mut lo, mut hi, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
            for &v in col {
                lo = lo.min(v);
                hi = hi.max(v);
                sum += v;
            }
            if hi <= lo {
                return Err(Error::ConstantFeature(train.feature_names[j].clone()));
            }
            scale[j] = 2.0 / (hi - lo);
            center[j] = sum / col.len() as f64;
        }
        Ok(Normalizer {
            scale,
            center,
            feature_names: train.feature_names.clone(),
        })
    }

    fn check(&self, data: &Dataset) -> Result<()> {
        if data.num_features() != self.scale.len() {
            return Err(Error::ShapeMismatch {
                expected: self.scale.len(),
                got: data.num_features(),
            });
        }
        Ok(())
    }

    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        self.check(data)?;
        let mut x = data.x.clone();
        for mut row in x.rows_mut() {
            row -= &self.center;
            row *= &self.scale;
        }
        Ok(Dataset {
            x,
            y: data.y.clone(),
            feature_names: data.feature_names.clone(),
        })
    }

    pub fn inverse(&self, data: &Dataset) -> Result<Dataset> {
        self.check(data)?;
        let mut x = data.x.clone();
        for mut row in x.rows_mut() {
            row /= &self.scale;
            row += &self.center;
        }
        Ok(Dataset {
            x,
            y: data.y.clone(),
            feature_names: data.feature_names.clone(),
        })
    }

    /// Normalize a bare point with the training transform.
    pub fn apply_point(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        if x.len() != self.scale.len() {
            return Err(Error::ShapeMismatch {
                expected: self.scale.len(),
                got: x.len(),
            });
        }
        Ok((&x - &self.center) * &self.scale)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&NormalizerJson {
            scale: self.scale.to_vec(),
            center: self.center.to_vec(),
            feature_names: self.feature_names.clone(),
        })
        .expect("serializable")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: NormalizerJson = serde_json::from_str(s)?;
        if raw.scale.len() != raw.center.len() || raw.scale.len() != raw.feature_names.len() {
            return Err(Error::DataFormat("normalizer field lengths differ".into()));
        }
        Ok(Normalizer {
            scale: Array1::from_vec(raw.scale),
            center: Array1::from_vec(raw.center),
            feature_names: raw.feature_names,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Write a dataset as CSV: optional `#` comment lines, a header of feature
/// names plus final column `y`, then one row per instance. Floats print in
/// shortest round-trip form, so a load reads back bit-identical values.
pub fn save_csv(data: &Dataset, path: impl AsRef<Path>, comment: Option<&str>) -> Result<()> {
    let mut out = String::new();
    if let Some(c) = comment {
        for line in c.lines() {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
    }
    out.push_str(&data.feature_names.join(","));
    out.push_str(",y\n");
    for (row, &label) in data.x.rows().into_iter().zip(data.y.iter()) {
        for v in row {
            out.push_str(&format!("{v}"));
            out.push(',');
        }
        out.push_str(&format!("{label}\n"));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Read a dataset written by [`save_csv`] (or by hand): header row of
/// feature names whose final column must be `y`, labels 0/1, `#` comments
/// skipped. Parse failures report the offending line number.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path.as_ref())?;
    let headers = reader.headers()?.clone();
    if headers.len() < 2 || headers.iter().last() != Some("y") {
        return Err(Error::DataFormat(
            "header must name feature columns and end with a final column 'y'".into(),
        ));
    }
    let feature_names: Vec<String> = headers.iter().take(headers.len() - 1).map(String::from).collect();
    let m = feature_names.len();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != m + 1 {
            return Err(Error::DataFormat(format!(
                "line {line}: expected {} fields, got {}",
                m + 1,
                record.len()
            )));
        }
        for field in record.iter().take(m) {
            let v: f64 = field.parse().map_err(|_| {
                Error::DataFormat(format!("line {line}: '{field}' is not a number"))
            })?;
            rows.push(v);
        }
        let label_field = &record[m];
        match label_field {
            "0" => labels.push(0u8),
            "1" => labels.push(1u8),
            other => {
                return Err(Error::DataFormat(format!(
                    "line {line}: label '{other}' is not 0 or 1"
                )))
            }
        }
    }
    let n = labels.len();
    if n == 0 {
        return Err(Error::DataFormat("no data rows".into()));
    }
    let x = Array2::from_shape_vec((n, m), rows).expect("row-major fill");
    Dataset::new(x, Array1::from_vec(labels), feature_names)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn tiny(xs: &[[f64; 1]], ys: &[u8]) -> Dataset {
        let x = Array2::from_shape_vec((xs.len(), 1), xs.iter().map(|r| r[0]).collect()).unwrap();
        Dataset::new(x, Array1::from_vec(ys.to_vec()), vec!["f".into()]).unwrap()
    }

    #[test]
    fn degenerate_spread_hits_the_means() {
        let data = gen_synthetic(4, 3, &DEFAULT_MEANS, 1e-15).unwrap();
        for (j, mean) in DEFAULT_MEANS.iter().enumerate() {
            assert_abs_diff_eq!(data.x[[j, 0]], mean[0], epsilon = 1e-12);
            assert_abs_diff_eq!(data.x[[j, 1]], mean[1], epsilon = 1e-12);
        }
        // XOR arrangement: equal-sign corners are class 1.
        assert_eq!(data.y.to_vec(), vec![1, 0, 1, 0]);
    }

    #[test]
    fn synthetic_parameter_validation() {
        assert!(matches!(
            gen_synthetic(3, 0, &DEFAULT_MEANS, 1.0),
            Err(Error::InvalidParameter(_))
        ));
        assert!(gen_synthetic(8, 0, &DEFAULT_MEANS, 0.0).is_err());
        assert!(gen_synthetic(8, 0, &DEFAULT_MEANS, -1.0).is_err());
    }

    #[test]
    fn synthetic_class_balance() {
        let data = gen_synthetic(5000, 1, &DEFAULT_MEANS, DEFAULT_SIGMA).unwrap();
        assert_eq!(data.class_counts(), (2500, 2500));
        for n in [4001, 4002, 4003] {
            let d = gen_synthetic(n, 1, &DEFAULT_MEANS, DEFAULT_SIGMA).unwrap();
            let (n0, n1) = d.class_counts();
            assert!(n0.abs_diff(n1) <= 3, "n={n}: {n0}/{n1}");
        }
    }

    #[test]
    fn synthetic_is_seed_deterministic() {
        let a = gen_synthetic(64, 9, &DEFAULT_MEANS, DEFAULT_SIGMA).unwrap();
        let b = gen_synthetic(64, 9, &DEFAULT_MEANS, DEFAULT_SIGMA).unwrap();
        assert_eq!(a, b);
        let c = gen_synthetic(64, 10, &DEFAULT_MEANS, DEFAULT_SIGMA).unwrap();
        assert_ne!(a.x, c.x);
    }

    #[test]
    fn component_sample_means_near_specified_means() {
        // Rows cycle through components, so row j belongs to component j%4;
        // a 4-standard-error band bounds each component's sample mean.
        let n = 4000;
        let data = gen_synthetic(n, 17, &DEFAULT_MEANS, DEFAULT_SIGMA).unwrap();
        let per = n / 4;
        let bound = 4.0 * DEFAULT_SIGMA / (per as f64).sqrt();
        for comp in 0..4 {
            for coord in 0..2 {
                let mean = (0..per)
                    .map(|i| data.x[[4 * i + comp, coord]])
                    .sum::<f64>()
                    / per as f64;
                assert!(
                    (mean - DEFAULT_MEANS[comp][coord]).abs() < bound,
                    "component {comp} coord {coord}: {mean}"
                );
            }
        }
    }

    #[test]
    fn split_sizes_and_partition() {
        let data = gen_synthetic(5000, 2, &DEFAULT_MEANS, DEFAULT_SIGMA).unwrap();
        let (train, test) = split(&data, 0.6, 5).unwrap();
        assert_eq!(train.len(), 3000);
        assert_eq!(test.len(), 2000);
        // Union is the original multiset of rows.
        let key = |d: &Dataset| {
            let mut rows: Vec<(u64, u64, u8)> = d
                .x
                .rows()
                .into_iter()
                .zip(d.y.iter())
                .map(|(r, &l)| (r[0].to_bits(), r[1].to_bits(), l))
                .collect();
            rows.sort_unstable();
            rows
        };
        let mut both = key(&train);
        both.extend(key(&test));
        both.sort_unstable();
        assert_eq!(both, key(&data));
        // Deterministic per seed.
        let (train2, _) = split(&data, 0.6, 5).unwrap();
        assert_eq!(train, train2);
    }

    #[test]
    fn split_rejects_degenerate_fractions() {
        let data = gen_synthetic(8, 0, &DEFAULT_MEANS, DEFAULT_SIGMA).unwrap();
        assert!(split(&data, 0.0, 0).is_err());
        assert!(split(&data, 1.0, 0).is_err());
        // Rounds to all-train.
        assert!(split(&data, 0.99, 0).is_err());
    }

    #[test]
    fn balance_subsamples_majority() {
        let mut ys = vec![0u8; 99];
        ys.extend_from_slice(&[1; 10]);
        let xs: Vec<[f64; 1]> = (0..109).map(|i| [i as f64]).collect();
        let data = tiny(&xs, &ys);
        let balanced = balance_classes(&data, 4).unwrap();
        assert_eq!(balanced.class_counts(), (10, 10));
        assert_eq!(balance_classes(&data, 4).unwrap(), balanced);
        // Every kept row exists in the original.
        for row in balanced.x.rows() {
            assert!(data.x.rows().into_iter().any(|r| r == row));
        }
    }

    #[test]
    fn balance_keeps_already_balanced_data() {
        let data = tiny(&[[0.0], [1.0], [2.0], [3.0]], &[0, 1, 0, 1]);
        assert_eq!(balance_classes(&data, 0).unwrap(), data);
    }

    #[test]
    fn balance_rejects_single_class() {
        let data = tiny(&[[0.0], [1.0]], &[1, 1]);
        assert!(matches!(
            balance_classes(&data, 0),
            Err(Error::TrainingData(_))
        ));
    }

    #[test]
    fn normalizer_symmetric_endpoints() {
        let train = tiny(&[[0.0], [10.0]], &[0, 1]);
        let norm = Normalizer::fit(&train).unwrap();
        let scaled = norm.apply(&train).unwrap();
        assert_eq!(scaled.x.column(0).to_vec(), vec![-1.0, 1.0]);
    }

    #[test]
    fn normalizer_can_exceed_unit_box() {
        // Mean 4, range 10: scale 0.2 → {−0.8, −0.4, 1.2}.
        let train = tiny(&[[0.0], [2.0], [10.0]], &[0, 1, 0]);
        let norm = Normalizer::fit(&train).unwrap();
        let scaled = norm.apply(&train).unwrap();
        let got = scaled.x.column(0).to_vec();
        for (g, want) in got.iter().zip([-0.8, -0.4, 1.2]) {
            assert_abs_diff_eq!(g, &want, epsilon = 1e-15);
        }
        assert!(got[2] > 1.0, "centering by mean can leave [-1,1]");
    }

    #[test]
    fn normalizer_same_map_for_test_points() {
        let train = tiny(&[[1.0], [3.0], [7.0]], &[0, 1, 0]);
        let norm = Normalizer::fit(&train).unwrap();
        let test = tiny(&[[3.0]], &[1]);
        let train_scaled = norm.apply(&train).unwrap();
        let test_scaled = norm.apply(&test).unwrap();
        assert_eq!(test_scaled.x[[0, 0]], train_scaled.x[[1, 0]]);
    }

    #[test]
    fn normalizer_rejects_constant_feature() {
        let train = tiny(&[[5.0], [5.0]], &[0, 1]);
        assert!(matches!(
            Normalizer::fit(&train),
            Err(Error::ConstantFeature(_))
        ));
    }

    #[test]
    fn normalizer_inverse_is_identity() {
        let data = gen_synthetic(200, 8, &DEFAULT_MEANS, DEFAULT_SIGMA).unwrap();
        let norm = Normalizer::fit(&data).unwrap();
        let back = norm.inverse(&norm.apply(&data).unwrap()).unwrap();
        for (a, b) in back.x.iter().zip(data.x.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn normalizer_json_round_trip() {
        let data = gen_synthetic(50, 8, &DEFAULT_MEANS, DEFAULT_SIGMA).unwrap();
        let norm = Normalizer::fit(&data).unwrap();
        let back = Normalizer::from_json(&norm.to_json()).unwrap();
        assert_eq!(norm, back);
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let data = gen_synthetic(100, 3, &DEFAULT_MEANS, DEFAULT_SIGMA).unwrap();
        save_csv(&data, &path, Some("cmd: gen-data --n 100")).unwrap();
        let back = load_csv(&path).unwrap();
        assert_eq!(back, data);
    }

    #[test]
    fn csv_column_means_match_writer() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("wide.csv");
        let data = gen_synthetic(1000, 13, &DEFAULT_MEANS, DEFAULT_SIGMA).unwrap();
        save_csv(&data, &path, None).unwrap();
        let back = load_csv(&path).unwrap();
        for j in 0..2 {
            let want = data.x.column(j).mean().unwrap();
            let got = back.x.column(j).mean().unwrap();
            assert_eq!(want, got);
        }
    }

    #[test]
    fn csv_rejects_missing_label_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "x1,x2,label\n1,2,0\n").unwrap();
        assert!(matches!(load_csv(&path), Err(Error::DataFormat(_))));
    }

    #[test]
    fn csv_reports_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "x1,y\n1.0,0\noops,1\n").unwrap();
        let err = load_csv(&path).unwrap_err().to_string();
        assert!(err.contains("line 3"), "got: {err}");
        std::fs::write(&path, "x1,y\n1.0,2\n").unwrap();
        let err = load_csv(&path).unwrap_err().to_string();
        assert!(err.contains("label"), "got: {err}");
    }
}
