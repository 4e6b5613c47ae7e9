//! Paired multi-grained scanning.
//!
//! Two identical sliding windows move over both members of a pair; each
//! window pair is concatenated and pushed through per-size scanning forests
//! (one Gini, one completely random) whose class vectors form the scanned
//! block of the cascade's level-1 input. Scanning forests always keep
//! uniform weights; weight optimization applies only to cascade levels.

use serde::{Deserialize, Serialize};

use crate::data::{concatenate_pair, PairDataset, Sample};
use crate::error::{Error, Result};
use crate::forest::{fit_forest, Forest};
use crate::matrix::Matrix;
use crate::seed::{self, tag};
use crate::trees::{TreeConfig, TreeKind};

/// Input layout for scanning: a flat vector or a row-major 2-D image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "shape")]
pub enum ScanShape {
    Vector1d,
    Image2d { height: usize, width: usize },
}

/// Scanning configuration.
///
/// `window_fractions` are divisors mapping the raw size to window sizes:
/// for a 1-D length `d` the defaults [16, 9, 4] give windows `d/16`, `d/9`,
/// `d/4`; for a 2-D side `s` the defaults [4, 3, 2] give square windows of
/// side `s/4`, `s/3`, `s/2`, whose areas track the 1-D fractions. Sizes
/// below 2 after flooring (or larger than the input) are skipped with a
/// warning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub enabled: bool,
    #[serde(flatten)]
    pub shape: ScanShape,
    pub window_fractions: Vec<u32>,
    pub trees_per_forest: usize,
    pub stride: usize,
}

impl ScanConfig {
    pub fn disabled() -> Self {
        ScanConfig {
            enabled: false,
            shape: ScanShape::Vector1d,
            window_fractions: default_divisors_1d(),
            trees_per_forest: 30,
            stride: 1,
        }
    }

    pub fn vector(trees_per_forest: usize) -> Self {
        ScanConfig {
            enabled: true,
            shape: ScanShape::Vector1d,
            window_fractions: default_divisors_1d(),
            trees_per_forest,
            stride: 1,
        }
    }

    pub fn image(height: usize, width: usize, trees_per_forest: usize) -> Self {
        ScanConfig {
            enabled: true,
            shape: ScanShape::Image2d { height, width },
            window_fractions: default_divisors_2d(),
            trees_per_forest,
            stride: 1,
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if !self.enabled {
            return Ok(());
        }
        if self.window_fractions.is_empty() {
            return Err(Error::config("scanning needs at least one window divisor".to_string()));
        }
        if self.window_fractions.iter().any(|&f| f == 0) {
            return Err(Error::config("window divisors must be positive".to_string()));
        }
        if self.trees_per_forest == 0 {
            return Err(Error::config(
                "scanning forests need at least one tree".to_string(),
            ));
        }
        if self.stride < 1 {
            return Err(Error::config("stride must be at least 1".to_string()));
        }
        if let ScanShape::Image2d { height, width } = self.shape {
            if height * width != d {
                return Err(Error::config(format!(
                    "image shape {height}x{width} does not cover {d} features"
                )));
            }
        }
        if self.window_sizes(d).is_empty() {
            return Err(Error::data(format!(
                "all window sizes degenerate (< 2) for input size {d}"
            )));
        }
        Ok(())
    }

    /// Base length the divisors apply to: the raw feature count for 1-D, the
    /// shorter image side for 2-D.
    fn base_extent(&self, d: usize) -> usize {
        match self.shape {
            ScanShape::Vector1d => d,
            ScanShape::Image2d { height, width } => height.min(width),
        }
    }

    /// Retained window sizes in divisor order: floored, deduplicated, sizes
    /// outside [2, extent] skipped.
    pub fn window_sizes(&self, d: usize) -> Vec<usize> {
        let extent = self.base_extent(d);
        let mut sizes = Vec::new();
        for &div in &self.window_fractions {
            let size = extent / div as usize;
            if size < 2 || size > extent {
                log::warn!("skipping degenerate scan window size {size} (divisor {div})");
                continue;
            }
            if !sizes.contains(&size) {
                sizes.push(size);
            }
        }
        sizes
    }

    /// Window positions for one size: `(d - L) / stride + 1` for 1-D,
    /// the product over both axes for 2-D.
    pub fn positions(&self, d: usize, size: usize) -> usize {
        match self.shape {
            ScanShape::Vector1d => (d - size) / self.stride + 1,
            ScanShape::Image2d { height, width } => {
                (((height - size) / self.stride) + 1) * (((width - size) / self.stride) + 1)
            }
        }
    }

    /// Width of the scanned block: each position contributes one 2-vector
    /// per scanning forest (two forests per size).
    pub fn transformed_width(&self, d: usize) -> usize {
        self.window_sizes(d)
            .iter()
            .map(|&size| self.positions(d, size) * 4)
            .sum()
    }
}

fn default_divisors_1d() -> Vec<u32> {
    vec![16, 9, 4]
}

fn default_divisors_2d() -> Vec<u32> {
    vec![4, 3, 2]
}

/// One window slice taken at the same offset from both pair members:
/// `a`'s slice followed by `b`'s.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowPair {
    pub offset: (usize, usize),
    pub values: Vec<f64>,
}

/// Window pairs for every retained size, positions in scan order
/// (left-to-right, then row-major for images).
pub fn extract_window_pairs(
    a: &Sample,
    b: &Sample,
    cfg: &ScanConfig,
) -> Result<Vec<(usize, Vec<WindowPair>)>> {
    if a.d() != b.d() {
        return Err(Error::data(format!(
            "pair members have widths {} and {}",
            a.d(),
            b.d()
        )));
    }
    cfg.validate(a.d())?;
    let d = a.d();
    let mut out = Vec::new();
    for size in cfg.window_sizes(d) {
        let mut windows = Vec::with_capacity(cfg.positions(d, size));
        match cfg.shape {
            ScanShape::Vector1d => {
                let mut pos = 0;
                while pos + size <= d {
                    let mut values = Vec::with_capacity(2 * size);
                    values.extend_from_slice(&a.features[pos..pos + size]);
                    values.extend_from_slice(&b.features[pos..pos + size]);
                    windows.push(WindowPair {
                        offset: (0, pos),
                        values,
                    });
                    pos += cfg.stride;
                }
            }
            ScanShape::Image2d { height, width } => {
                let mut row = 0;
                while row + size <= height {
                    let mut col = 0;
                    while col + size <= width {
                        let mut values = Vec::with_capacity(2 * size * size);
                        for member in [&a.features, &b.features] {
                            for r in row..row + size {
                                let start = r * width + col;
                                values.extend_from_slice(&member[start..start + size]);
                            }
                        }
                        windows.push(WindowPair {
                            offset: (row, col),
                            values,
                        });
                        col += cfg.stride;
                    }
                    row += cfg.stride;
                }
            }
        }
        out.push((size, windows));
    }
    Ok(out)
}

/// Scanning forests for one window size.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeScanner {
    pub size: usize,
    /// Gini forest first, completely-random forest second.
    pub forests: Vec<Forest>,
}

/// All fitted scanning forests plus the config needed to replay them.
#[derive(Debug, Clone, PartialEq)]
pub struct Scanners {
    config: ScanConfig,
    sizes: Vec<SizeScanner>,
    d: usize,
}

impl Scanners {
    pub fn config(&self) -> &ScanConfig {
        &self.config
    }

    pub fn sizes(&self) -> &[SizeScanner] {
        &self.sizes
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Reassemble from persisted parts, validating forest widths against the
    /// window layout.
    pub fn from_parts(config: ScanConfig, sizes: Vec<SizeScanner>, d: usize) -> Result<Self> {
        config.validate(d)?;
        let expected = config.window_sizes(d);
        if expected.len() != sizes.len() {
            return Err(Error::model(format!(
                "{} scanner sizes stored, config yields {}",
                sizes.len(),
                expected.len()
            )));
        }
        for (scanner, &size) in sizes.iter().zip(&expected) {
            if scanner.size != size {
                return Err(Error::model(format!(
                    "scanner size {} does not match configured size {}",
                    scanner.size, size
                )));
            }
            if scanner.forests.len() != 2 {
                return Err(Error::model(format!(
                    "scanner for size {size} must hold 2 forests, found {}",
                    scanner.forests.len()
                )));
            }
            let expected_width = match config.shape {
                ScanShape::Vector1d => 2 * size,
                ScanShape::Image2d { .. } => 2 * size * size,
            };
            for f in &scanner.forests {
                if f.width() != expected_width {
                    return Err(Error::model(format!(
                        "scanner forest width {} does not match window width {expected_width}",
                        f.width()
                    )));
                }
            }
        }
        Ok(Scanners { config, sizes, d })
    }

    /// Width of the full level-1 input: raw pair section plus scanned block.
    pub fn output_width(&self) -> usize {
        2 * self.d + self.config.transformed_width(self.d)
    }
}

/// Fit one Gini and one completely-random forest per window size on all
/// training window pairs, each labeled with its pair's label. Uniform
/// weights throughout.
pub fn fit_scanners(
    ds: &crate::data::LabeledDataset,
    pairs: &PairDataset,
    cfg: &ScanConfig,
    scan_seed: u64,
) -> Result<Scanners> {
    if !cfg.enabled {
        return Err(Error::config("fit_scanners called with scanning disabled".to_string()));
    }
    cfg.validate(ds.d())?;
    if pairs.is_empty() {
        return Err(Error::data("cannot fit scanners on an empty pair set".to_string()));
    }

    let d = ds.d();
    let mut sizes = Vec::new();
    for (size_idx, size) in cfg.window_sizes(d).into_iter().enumerate() {
        let window_width = match cfg.shape {
            ScanShape::Vector1d => 2 * size,
            ScanShape::Image2d { .. } => 2 * size * size,
        };
        let mut x = Matrix::with_cols(window_width);
        let mut y = Vec::new();
        for pair in pairs.pairs() {
            let a = ds.sample(pair.i);
            let b = ds.sample(pair.j);
            let extracted = extract_window_pairs(a, b, cfg)?;
            let (_, windows) = &extracted[size_idx];
            for w in windows {
                x.push_row(&w.values)?;
                y.push(pair.y);
            }
        }
        let mut forests = Vec::with_capacity(2);
        for (forest_idx, kind) in [TreeKind::RandomForest, TreeKind::CompleteRandom]
            .into_iter()
            .enumerate()
        {
            let forest_seed = seed::derive(
                scan_seed,
                &[tag::SCAN, size_idx as u64, forest_idx as u64],
            );
            forests.push(fit_forest(
                &x,
                &y,
                &TreeConfig::new(kind),
                cfg.trees_per_forest,
                forest_seed,
            )?);
        }
        sizes.push(SizeScanner { size, forests });
    }
    Ok(Scanners {
        config: cfg.clone(),
        sizes,
        d,
    })
}

/// Build the cascade's level-1 input for one pair: the raw `2d`
/// concatenation followed, when scanning is enabled, by the class vectors of
/// every (size, position, forest) in scan order.
pub fn transform_pair(a: &Sample, b: &Sample, scanners: Option<&Scanners>) -> Result<Vec<f64>> {
    let mut out = concatenate_pair(a, b)?;
    let Some(scanners) = scanners else {
        return Ok(out);
    };
    if a.d() != scanners.d {
        return Err(Error::data(format!(
            "pair width {} does not match scanner width {}",
            a.d(),
            scanners.d
        )));
    }
    let extracted = extract_window_pairs(a, b, &scanners.config)?;
    for ((_, windows), scanner) in extracted.iter().zip(&scanners.sizes) {
        for window in windows {
            for forest in &scanner.forests {
                let v = forest.weighted_class_vector(&window.values)?;
                out.push(v[0]);
                out.push(v[1]);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_pairs, LabeledDataset};

    fn sample(id: usize, features: Vec<f64>) -> Sample {
        Sample { id, features }
    }

    #[test]
    fn window_counts_1d() {
        let cfg = ScanConfig::vector(5);
        // d = 16: divisors 16, 9 give size 1 (skipped), 4 gives size 4.
        assert_eq!(cfg.window_sizes(16), vec![4]);
        let a = sample(0, (0..16).map(f64::from).collect());
        let b = sample(1, (16..32).map(f64::from).collect());
        let extracted = extract_window_pairs(&a, &b, &cfg).unwrap();
        assert_eq!(extracted.len(), 1);
        let (size, windows) = &extracted[0];
        assert_eq!(*size, 4);
        assert_eq!(windows.len(), 13);
        assert!(windows.iter().all(|w| w.values.len() == 8));
    }

    #[test]
    fn degenerate_sizes_skipped() {
        let cfg = ScanConfig::vector(5);
        // d = 9: floor table gives {0, 1, 2}; only size 2 survives.
        assert_eq!(cfg.window_sizes(9), vec![2]);
        assert_eq!(cfg.positions(9, 2), 8);
        // d = 1 leaves nothing.
        let tiny = sample(0, vec![1.0]);
        let tiny2 = sample(1, vec![2.0]);
        assert!(extract_window_pairs(&tiny, &tiny2, &cfg).is_err());
    }

    #[test]
    fn window_counts_2d() {
        let cfg = ScanConfig::image(28, 28, 5);
        assert_eq!(cfg.window_sizes(784), vec![7, 9, 14]);
        assert_eq!(cfg.positions(784, 14), 15 * 15);
    }

    #[test]
    fn window_pair_positional_identity() {
        let a = sample(0, (0..20).map(|v| v as f64).collect());
        let b = sample(1, (0..20).map(|v| (v * 10) as f64).collect());
        let cfg = ScanConfig::vector(5);
        for (size, windows) in extract_window_pairs(&a, &b, &cfg).unwrap() {
            for w in windows {
                let (_, pos) = w.offset;
                assert_eq!(&w.values[..size], &a.features[pos..pos + size]);
                assert_eq!(&w.values[size..], &b.features[pos..pos + size]);
            }
        }
    }

    #[test]
    fn swapping_members_swaps_halves() {
        let a = sample(0, (0..12).map(|v| v as f64).collect());
        let b = sample(1, (0..12).map(|v| -(v as f64)).collect());
        let cfg = ScanConfig::vector(5);
        let ab = extract_window_pairs(&a, &b, &cfg).unwrap();
        let ba = extract_window_pairs(&b, &a, &cfg).unwrap();
        for ((size, ws_ab), (_, ws_ba)) in ab.iter().zip(&ba) {
            for (w1, w2) in ws_ab.iter().zip(ws_ba) {
                assert_eq!(&w1.values[..*size], &w2.values[*size..]);
                assert_eq!(&w1.values[*size..], &w2.values[..*size]);
            }
        }
    }

    #[test]
    fn image_window_is_square_slice() {
        // 3x4 image, window side 2 via divisor list [2] on min side 3 -> 1
        // is skipped, so use explicit divisors.
        let mut cfg = ScanConfig::image(3, 4, 5);
        cfg.window_fractions = vec![1]; // side 3 windows
        let a = sample(0, (0..12).map(f64::from).collect());
        let b = sample(1, (100..112).map(f64::from).collect());
        let extracted = extract_window_pairs(&a, &b, &cfg).unwrap();
        let (size, windows) = &extracted[0];
        assert_eq!(*size, 3);
        assert_eq!(windows.len(), 2); // (3-3+1) * (4-3+1)
        // First window: rows 0..3, cols 0..3 of a row-major 3x4 grid.
        assert_eq!(
            windows[0].values[..9],
            [0.0, 1.0, 2.0, 4.0, 5.0, 6.0, 8.0, 9.0, 10.0]
        );
    }

    fn scan_dataset() -> (LabeledDataset, PairDataset) {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        let mut rng_state = 1u64;
        let mut next = move || {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1);
            ((rng_state >> 33) as f64) / (1u64 << 31) as f64
        };
        for i in 0..14 {
            let class = i % 2;
            let base = if class == 0 { 0.0 } else { 2.0 };
            rows.push((0..12).map(|_| base + next()).collect::<Vec<f64>>());
            labels.push(format!("c{class}"));
        }
        let ds = LabeledDataset::new(rows, labels).unwrap();
        let pairs = generate_pairs(&ds, 16, 0.5, 5).unwrap();
        (ds, pairs)
    }

    #[test]
    fn fit_scanners_deterministic_and_normalized() {
        let (ds, pairs) = scan_dataset();
        let cfg = ScanConfig::vector(4);
        let s1 = fit_scanners(&ds, &pairs, &cfg, 77).unwrap();
        let s2 = fit_scanners(&ds, &pairs, &cfg, 77).unwrap();
        assert_eq!(s1, s2);

        let a = ds.sample(0);
        let b = ds.sample(1);
        let out = transform_pair(a, b, Some(&s1)).unwrap();
        assert_eq!(out.len(), s1.output_width());
        // Scanned block decomposes into probability 2-vectors.
        let block = &out[2 * ds.d()..];
        for chunk in block.chunks(2) {
            assert!((chunk[0] + chunk[1] - 1.0).abs() <= 1e-9);
            assert!(chunk[0] >= 0.0 && chunk[0] <= 1.0);
        }
    }

    #[test]
    fn disabled_scanning_is_identity() {
        let a = sample(0, vec![1.0, 2.0]);
        let b = sample(1, vec![3.0, 4.0]);
        let out = transform_pair(&a, &b, None).unwrap();
        assert_eq!(out, vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn transformed_width_matches_enumeration() {
        let cfg = ScanConfig::vector(4);
        for d in [9usize, 12, 16, 20, 33, 48] {
            let a = sample(0, vec![0.5; d]);
            let b = sample(1, vec![1.5; d]);
            let enumerated: usize = extract_window_pairs(&a, &b, &cfg)
                .unwrap()
                .iter()
                .map(|(_, ws)| ws.len() * 4)
                .sum();
            assert_eq!(cfg.transformed_width(d), enumerated, "d = {d}");
        }
    }
}
