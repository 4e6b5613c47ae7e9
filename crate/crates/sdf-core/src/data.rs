//! Labeled tabular data, similar/dissimilar pair generation, and
//! train/test splitting.
//!
//! Labels are opaque strings compared only for equality: a pair is *similar*
//! (`y = 0`) when both members carry the same label and *dissimilar*
//! (`y = 1`) otherwise. Nothing else about the label is ever used.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::seed;

/// A single example: a feature vector plus its row index in the dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: usize,
    pub features: Vec<f64>,
}

impl Sample {
    pub fn d(&self) -> usize {
        self.features.len()
    }
}

/// Samples with one class label per row, all feature vectors of equal length.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    samples: Vec<Sample>,
    labels: Vec<String>,
    d: usize,
}

impl LabeledDataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<String>) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::data(format!(
                "{} feature rows but {} labels",
                features.len(),
                labels.len()
            )));
        }
        let d = features.first().map_or(0, Vec::len);
        let mut samples = Vec::with_capacity(features.len());
        for (id, row) in features.into_iter().enumerate() {
            if row.len() != d {
                return Err(Error::data(format!(
                    "row {} has {} features, expected {}",
                    id,
                    row.len(),
                    d
                )));
            }
            if let Some(col) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::data(format!(
                    "non-finite feature at row {id}, column {col}"
                )));
            }
            samples.push(Sample { id, features: row });
        }
        Ok(LabeledDataset { samples, labels, d })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn sample(&self, i: usize) -> &Sample {
        &self.samples[i]
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Number of distinct labels.
    pub fn n_classes(&self) -> usize {
        let mut seen: Vec<&str> = Vec::new();
        for l in &self.labels {
            if !seen.contains(&l.as_str()) {
                seen.push(l);
            }
        }
        seen.len()
    }
}

/// Which CSV column holds the class label: a zero-based index or `last`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelColumn {
    Index(usize),
    Last,
}

impl FromStr for LabelColumn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "last" {
            Ok(LabelColumn::Last)
        } else {
            s.parse::<usize>().map(LabelColumn::Index).map_err(|_| {
                Error::config(format!(
                    "label column must be a zero-based index or \"last\", got {s:?}"
                ))
            })
        }
    }
}

impl fmt::Display for LabelColumn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelColumn::Index(i) => write!(f, "{i}"),
            LabelColumn::Last => write!(f, "last"),
        }
    }
}

/// Load a CSV of numeric features plus one label column.
///
/// Row order is preserved and labels are taken verbatim as strings. Errors
/// (ragged rows, non-numeric cells, missing label column) name the offending
/// 1-based row and 0-based column.
pub fn load_csv(path: &Path, label_column: LabelColumn, has_header: bool) -> Result<LabeledDataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(file);

    let mut features: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<String> = Vec::new();
    let mut width: Option<usize> = None;

    for (idx, record) in reader.records().enumerate() {
        let row_no = idx + 1; // 1-based, counting the header row if present
        let record = record.map_err(|e| {
            Error::data(format!("{}: row {}: {}", path.display(), row_no, e))
        })?;
        if has_header && idx == 0 {
            continue;
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(Error::data(format!(
                    "{}: row {}: expected {} columns, found {}",
                    path.display(),
                    row_no,
                    w,
                    record.len()
                )));
            }
            _ => {}
        }
        let ncols = record.len();
        let label_idx = match label_column {
            LabelColumn::Index(i) => i,
            LabelColumn::Last => ncols.saturating_sub(1),
        };
        if label_idx >= ncols || ncols == 0 {
            return Err(Error::data(format!(
                "{}: row {}: label column {} out of range ({} columns)",
                path.display(),
                row_no,
                label_idx,
                ncols
            )));
        }
        let mut row = Vec::with_capacity(ncols - 1);
        for (col, cell) in record.iter().enumerate() {
            if col == label_idx {
                labels.push(cell.to_string());
                continue;
            }
            let value: f64 = cell.trim().parse().map_err(|_| {
                Error::data(format!(
                    "{}: row {}, column {}: cannot parse {:?} as a number",
                    path.display(),
                    row_no,
                    col,
                    cell
                ))
            })?;
            if !value.is_finite() {
                return Err(Error::data(format!(
                    "{}: row {}, column {}: non-finite value {:?}",
                    path.display(),
                    row_no,
                    col,
                    cell
                )));
            }
            row.push(value);
        }
        features.push(row);
    }

    if features.is_empty() {
        return Err(Error::data(format!(
            "{}: no data rows",
            path.display()
        )));
    }
    LabeledDataset::new(features, labels)
}

/// A labeled pair of sample indices. `y = 0` means similar, `y = 1` dissimilar.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pair {
    pub i: usize,
    pub j: usize,
    pub y: u8,
}

/// A set of labeled pairs over a dataset of `n_samples` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct PairDataset {
    pairs: Vec<Pair>,
    n_samples: usize,
}

impl PairDataset {
    pub fn new(pairs: Vec<Pair>, n_samples: usize) -> Result<Self> {
        for (idx, p) in pairs.iter().enumerate() {
            if p.i == p.j {
                return Err(Error::data(format!(
                    "pair {idx} has identical indices ({}, {})",
                    p.i, p.j
                )));
            }
            if p.i >= n_samples || p.j >= n_samples {
                return Err(Error::data(format!(
                    "pair {idx} ({}, {}) out of range for {} samples",
                    p.i, p.j, n_samples
                )));
            }
            if p.y > 1 {
                return Err(Error::data(format!("pair {idx} has label {} outside {{0,1}}", p.y)));
            }
        }
        Ok(PairDataset { pairs, n_samples })
    }

    pub fn pairs(&self) -> &[Pair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    /// Labels of all pairs in order.
    pub fn labels(&self) -> Vec<u8> {
        self.pairs.iter().map(|p| p.y).collect()
    }
}

/// Generate `n` pairs, `round(n * balance)` of them similar, the rest
/// dissimilar.
///
/// Combinations are unordered: `(i, j)` and `(j, i)` count as the same pair.
/// Each side samples without replacement when enough distinct combinations
/// exist, with replacement otherwise. Deterministic for a fixed seed.
pub fn generate_pairs(
    ds: &LabeledDataset,
    n: usize,
    balance: f64,
    seed: u64,
) -> Result<PairDataset> {
    if n < 2 {
        return Err(Error::data(format!("pair count must be at least 2, got {n}")));
    }
    if !(0.0..=1.0).contains(&balance) {
        return Err(Error::config(format!("balance must lie in [0, 1], got {balance}")));
    }
    if ds.n_classes() < 2 {
        return Err(Error::data(
            "pair generation needs at least 2 distinct classes".to_string(),
        ));
    }

    let n_similar = (n as f64 * balance).round() as usize;
    let n_dissimilar = n - n_similar;

    // Enumerate unordered index combinations by side. Desk-scale datasets
    // keep this quadratic enumeration cheap.
    let mut similar: Vec<(usize, usize)> = Vec::new();
    let mut dissimilar: Vec<(usize, usize)> = Vec::new();
    for i in 0..ds.len() {
        for j in (i + 1)..ds.len() {
            if ds.label(i) == ds.label(j) {
                similar.push((i, j));
            } else {
                dissimilar.push((i, j));
            }
        }
    }

    if n_similar > 0 && similar.is_empty() {
        return Err(Error::data(
            "no class has 2 or more members, cannot draw similar pairs".to_string(),
        ));
    }
    if n_dissimilar > 0 && dissimilar.is_empty() {
        return Err(Error::data("no dissimilar combinations available".to_string()));
    }

    let mut rng = seed::rng(seed);
    let mut draw = |combos: &mut Vec<(usize, usize)>, count: usize, y: u8, out: &mut Vec<Pair>| {
        if count <= combos.len() {
            // Partial Fisher-Yates: uniform without replacement.
            for k in 0..count {
                let pick = k + rng.gen_range(0..combos.len() - k);
                combos.swap(k, pick);
                let (i, j) = combos[k];
                out.push(Pair { i, j, y });
            }
        } else {
            for _ in 0..count {
                let (i, j) = combos[rng.gen_range(0..combos.len())];
                out.push(Pair { i, j, y });
            }
        }
    };

    let mut pairs = Vec::with_capacity(n);
    draw(&mut similar, n_similar, 0, &mut pairs);
    draw(&mut dissimilar, n_dissimilar, 1, &mut pairs);
    PairDataset::new(pairs, ds.len())
}

/// Number of test pairs for a given training size: `ceil(2 * n_train / 3)`.
pub fn test_size(n_train: usize) -> usize {
    (2 * n_train).div_ceil(3)
}

/// Split into a training set of exactly `n_train` pairs and a disjoint test
/// set of `ceil(2 * n_train / 3)` pairs. Deterministic for a fixed seed.
pub fn split_pairs(
    pd: &PairDataset,
    n_train: usize,
    seed: u64,
) -> Result<(PairDataset, PairDataset)> {
    let n_test = test_size(n_train);
    if pd.len() < n_train + n_test {
        return Err(Error::data(format!(
            "need {} pairs for a {}/{} split, have {}",
            n_train + n_test,
            n_train,
            n_test,
            pd.len()
        )));
    }
    let mut rng = seed::rng(seed);
    let mut indices: Vec<usize> = (0..pd.len()).collect();
    for k in 0..(n_train + n_test) {
        let pick = k + rng.gen_range(0..indices.len() - k);
        indices.swap(k, pick);
    }
    let train: Vec<Pair> = indices[..n_train].iter().map(|&i| pd.pairs[i]).collect();
    let test: Vec<Pair> = indices[n_train..n_train + n_test]
        .iter()
        .map(|&i| pd.pairs[i])
        .collect();
    Ok((
        PairDataset::new(train, pd.n_samples)?,
        PairDataset::new(test, pd.n_samples)?,
    ))
}

/// Concatenate two samples into one `2d`-length vector, `a` first.
pub fn concatenate_pair(a: &Sample, b: &Sample) -> Result<Vec<f64>> {
    if a.d() != b.d() {
        return Err(Error::data(format!(
            "cannot concatenate samples of widths {} and {}",
            a.d(),
            b.d()
        )));
    }
    if a.d() == 0 {
        return Err(Error::data("cannot concatenate zero-width samples".to_string()));
    }
    let mut out = Vec::with_capacity(2 * a.d());
    out.extend_from_slice(&a.features);
    out.extend_from_slice(&b.features);
    Ok(out)
}

/// Write a pair set as CSV with header `i,j,y`.
pub fn write_pairs_csv(pd: &PairDataset, path: &Path) -> Result<()> {
    let mut out = String::from("i,j,y\n");
    for p in &pd.pairs {
        out.push_str(&format!("{},{},{}\n", p.i, p.j, p.y));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Read a pair CSV (header `i,j,y`) and validate indices against `n_samples`.
pub fn read_pairs_csv(path: &Path, n_samples: usize) -> Result<PairDataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file);
    let mut pairs = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let row_no = idx + 2;
        let record =
            record.map_err(|e| Error::data(format!("{}: row {}: {}", path.display(), row_no, e)))?;
        if record.len() != 3 {
            return Err(Error::data(format!(
                "{}: row {}: expected 3 columns (i,j,y), found {}",
                path.display(),
                row_no,
                record.len()
            )));
        }
        let parse = |col: usize| -> Result<usize> {
            record[col].trim().parse().map_err(|_| {
                Error::data(format!(
                    "{}: row {}, column {}: cannot parse {:?} as an integer",
                    path.display(),
                    row_no,
                    col,
                    &record[col]
                ))
            })
        };
        let (i, j, y) = (parse(0)?, parse(1)?, parse(2)?);
        if y > 1 {
            return Err(Error::data(format!(
                "{}: row {}: pair label {} outside {{0,1}}",
                path.display(),
                row_no,
                y
            )));
        }
        pairs.push(Pair { i, j, y: y as u8 });
    }
    PairDataset::new(pairs, n_samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_dataset() -> LabeledDataset {
        LabeledDataset::new(
            vec![vec![0.0, 1.0], vec![0.5, 1.5], vec![5.0, 5.0]],
            vec!["A".into(), "A".into(), "B".into()],
        )
        .unwrap()
    }

    #[test]
    fn load_csv_basic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        std::fs::write(&path, "1.0,2.0,A\n3.0,4.0,B\n5.0,6.0,A\n").unwrap();
        let ds = load_csv(&path, LabelColumn::Last, false).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.d(), 2);
        assert_eq!(ds.label(1), "B");
        assert_eq!(ds.sample(2).features, vec![5.0, 6.0]);
    }

    #[test]
    fn load_csv_bad_cell_names_position() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        std::fs::write(&path, "1.0,2.0,A\n3.0,abc,B\n").unwrap();
        let err = load_csv(&path, LabelColumn::Last, false).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 2"), "{msg}");
        assert!(msg.contains("column 1"), "{msg}");
        assert!(msg.contains("abc"), "{msg}");
    }

    #[test]
    fn load_csv_header_excluded() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        std::fs::write(&path, "f0,f1,label\n1.0,2.0,A\n3.0,4.0,B\n").unwrap();
        let ds = load_csv(&path, LabelColumn::Last, true).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.label(0), "A");
    }

    #[test]
    fn load_csv_ragged_and_empty() {
        let dir = tempfile::tempdir().unwrap();
        let ragged = dir.path().join("r.csv");
        std::fs::write(&ragged, "1.0,2.0,A\n3.0,B\n").unwrap();
        let err = load_csv(&ragged, LabelColumn::Last, false).unwrap_err();
        assert!(err.to_string().contains("row 2"), "{err}");

        let empty = dir.path().join("e.csv");
        std::fs::write(&empty, "").unwrap();
        assert!(load_csv(&empty, LabelColumn::Last, false).is_err());
    }

    #[test]
    fn load_csv_label_by_index() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        std::fs::write(&path, "A,1.0,2.0\nB,3.0,4.0\n").unwrap();
        let ds = load_csv(&path, LabelColumn::Index(0), false).unwrap();
        assert_eq!(ds.d(), 2);
        assert_eq!(ds.label(0), "A");
        assert_eq!(ds.sample(0).features, vec![1.0, 2.0]);
    }

    #[test]
    fn generate_pairs_label_semantics() {
        let ds = toy_dataset();
        // Exhaustive check over everything generated.
        let pd = generate_pairs(&ds, 4, 0.5, 9).unwrap();
        for p in pd.pairs() {
            let same = ds.label(p.i) == ds.label(p.j);
            assert_eq!(p.y == 0, same, "pair {:?}", p);
        }
    }

    #[test]
    fn generate_pairs_balance_counts() {
        let ds = toy_dataset();
        let pd = generate_pairs(&ds, 4, 0.5, 1).unwrap();
        assert_eq!(pd.len(), 4);
        assert_eq!(pd.pairs().iter().filter(|p| p.y == 0).count(), 2);
        assert_eq!(pd.pairs().iter().filter(|p| p.y == 1).count(), 2);
    }

    #[test]
    fn generate_pairs_deterministic() {
        let ds = toy_dataset();
        let a = generate_pairs(&ds, 6, 0.5, 77).unwrap();
        let b = generate_pairs(&ds, 6, 0.5, 77).unwrap();
        assert_eq!(a, b);
        let c = generate_pairs(&ds, 6, 0.5, 78).unwrap();
        assert!(a != c || a.pairs() == c.pairs());
    }

    #[test]
    fn generate_pairs_no_similar_supply() {
        let ds = LabeledDataset::new(
            vec![vec![0.0], vec![1.0]],
            vec!["A".into(), "B".into()],
        )
        .unwrap();
        let err = generate_pairs(&ds, 4, 0.5, 1).unwrap_err();
        assert!(err.to_string().contains("similar"), "{err}");
        // balance = 0 never needs similar pairs, so the same dataset works.
        let pd = generate_pairs(&ds, 4, 0.0, 1).unwrap();
        assert!(pd.pairs().iter().all(|p| p.y == 1));
    }

    #[test]
    fn split_sizes_match_contract() {
        assert_eq!(test_size(100), 67);
        assert_eq!(test_size(2000), 1334);
        let ds = toy_dataset();
        let pd = generate_pairs(&ds, 20, 0.5, 3).unwrap();
        let (train, test) = split_pairs(&pd, 12, 5).unwrap();
        assert_eq!(train.len(), 12);
        assert_eq!(test.len(), 8);
    }

    #[test]
    fn split_pairs_disjoint_and_deterministic() {
        let ds = toy_dataset();
        let pd = generate_pairs(&ds, 30, 0.5, 3).unwrap();
        let (train, test) = split_pairs(&pd, 18, 11).unwrap();
        let (train2, test2) = split_pairs(&pd, 18, 11).unwrap();
        assert_eq!(train, train2);
        assert_eq!(test, test2);
        // Disjoint as index sets into pd: every drawn pair occurrence is
        // distinct because split_pairs permutes positions.
        let mut seen = vec![0usize; pd.len()];
        for p in train.pairs().iter().chain(test.pairs()) {
            let pos = pd
                .pairs()
                .iter()
                .enumerate()
                .position(|(k, q)| q == p && seen[k] == 0)
                .unwrap();
            seen[pos] = 1;
        }
    }

    #[test]
    fn split_pairs_insufficient() {
        let ds = toy_dataset();
        let pd = generate_pairs(&ds, 10, 0.5, 3).unwrap();
        assert!(split_pairs(&pd, 10, 1).is_err());
    }

    #[test]
    fn concatenate_examples() {
        let a = Sample { id: 0, features: vec![1.0, 2.0] };
        let b = Sample { id: 1, features: vec![3.0, 4.0] };
        assert_eq!(concatenate_pair(&a, &b).unwrap(), vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(concatenate_pair(&b, &a).unwrap(), vec![3.0, 4.0, 1.0, 2.0]);

        let empty = Sample { id: 2, features: vec![] };
        assert!(concatenate_pair(&empty, &empty).is_err());

        let wide = Sample { id: 3, features: vec![1.0, 2.0, 3.0] };
        assert!(concatenate_pair(&a, &wide).is_err());
    }

    #[test]
    fn pair_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        let pd = PairDataset::new(
            vec![Pair { i: 0, j: 2, y: 1 }, Pair { i: 1, j: 0, y: 0 }],
            3,
        )
        .unwrap();
        write_pairs_csv(&pd, &path).unwrap();
        let loaded = read_pairs_csv(&path, 3).unwrap();
        assert_eq!(loaded, pd);
        // Out-of-range index rejected against a smaller sample store.
        assert!(read_pairs_csv(&path, 2).is_err());
    }

    #[test]
    fn pair_dataset_validation() {
        assert!(PairDataset::new(vec![Pair { i: 1, j: 1, y: 0 }], 3).is_err());
        assert!(PairDataset::new(vec![Pair { i: 0, j: 3, y: 0 }], 3).is_err());
        assert!(PairDataset::new(vec![Pair { i: 0, j: 1, y: 2 }], 3).is_err());
    }
}
