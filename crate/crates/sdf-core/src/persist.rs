//! Versioned JSON model serialization with exact round-trips.
//!
//! The file layout is documented in `docs/model-format.md`. Output is
//! canonical: object keys sorted, floats written in shortest round-trip
//! decimal form, one trailing newline. Identical models therefore produce
//! byte-identical files, and reloading reproduces predictions bit for bit.
//! Every structural invariant (simplex weights, leaf distributions, node
//! wiring, level width chaining) is re-checked on load.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cascade::{CascadeConfig, Level, ModelMetadata, SdfModel};
use crate::error::{Error, Result};
use crate::forest::{Forest, SIMPLEX_TOL};
use crate::scanning::{ScanShape, Scanners, SizeScanner};
use crate::trees::{DecisionTree, Node, TreeConfig, TreeKind};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileModel {
    format_version: u32,
    d: usize,
    config: CascadeConfig,
    levels: Vec<FileLevel>,
    scanning: Option<FileScanners>,
    metadata: ModelMetadata,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileLevel {
    input_width: usize,
    forests: Vec<FileForest>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileForest {
    kind: TreeKind,
    weights: Vec<f64>,
    trees: Vec<FileTree>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileTree {
    nodes: Vec<FileNode>,
}

/// Internal nodes are `{f, thr, l, r}`, leaves `{dist: [p0, p1]}`.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum FileNode {
    Split { f: u32, thr: f64, l: u32, r: u32 },
    Leaf { dist: [f64; 2] },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileScanners {
    sizes: Vec<FileSizeScanner>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileSizeScanner {
    size: usize,
    forests: Vec<FileForest>,
}

fn tree_to_file(tree: &DecisionTree) -> FileTree {
    FileTree {
        nodes: tree
            .nodes()
            .iter()
            .map(|n| match *n {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => FileNode::Split {
                    f: feature,
                    thr: threshold,
                    l: left,
                    r: right,
                },
                Node::Leaf { dist } => FileNode::Leaf { dist },
            })
            .collect(),
    }
}

fn forest_to_file(forest: &Forest) -> FileForest {
    FileForest {
        kind: forest.kind(),
        weights: forest.weights().to_vec(),
        trees: forest.trees().iter().map(tree_to_file).collect(),
    }
}

fn forest_from_file(
    file: FileForest,
    width: usize,
    expected_trees: usize,
    context: &str,
) -> Result<Forest> {
    if file.trees.len() != expected_trees {
        return Err(Error::model(format!(
            "{context}: {} trees stored, config says {expected_trees}",
            file.trees.len()
        )));
    }
    if file.weights.len() != file.trees.len() {
        return Err(Error::model(format!(
            "{context}: {} weights for {} trees",
            file.weights.len(),
            file.trees.len()
        )));
    }
    if let Some(idx) = file
        .weights
        .iter()
        .position(|w| !w.is_finite() || *w < 0.0)
    {
        return Err(Error::model(format!(
            "{context}: simplex violation: weight {} at tree {idx} is negative or non-finite",
            file.weights[idx]
        )));
    }
    let sum: f64 = file.weights.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::model(format!(
            "{context}: simplex violation: weights sum to {sum}"
        )));
    }
    let trees: Result<Vec<DecisionTree>> = file
        .trees
        .into_iter()
        .enumerate()
        .map(|(t, ft)| {
            let nodes: Vec<Node> = ft
                .nodes
                .into_iter()
                .map(|n| match n {
                    FileNode::Split { f, thr, l, r } => Node::Split {
                        feature: f,
                        threshold: thr,
                        left: l,
                        right: r,
                    },
                    FileNode::Leaf { dist } => Node::Leaf { dist },
                })
                .collect();
            DecisionTree::from_nodes(nodes, width, TreeConfig::new(file.kind), 0)
                .map_err(|e| Error::model(format!("{context} tree {t}: {e}")))
        })
        .collect();
    Forest::from_parts(trees?, file.kind, file.weights)
        .map_err(|e| Error::model(format!("{context}: {e}")))
}

fn model_to_file(model: &SdfModel) -> FileModel {
    FileModel {
        format_version: FORMAT_VERSION,
        d: model.d(),
        config: model.config().clone(),
        levels: model
            .levels()
            .iter()
            .map(|level| FileLevel {
                input_width: level.input_width(),
                forests: level.forests().iter().map(forest_to_file).collect(),
            })
            .collect(),
        scanning: model.scanners().map(|s| FileScanners {
            sizes: s
                .sizes()
                .iter()
                .map(|size| FileSizeScanner {
                    size: size.size,
                    forests: size.forests.iter().map(forest_to_file).collect(),
                })
                .collect(),
        }),
        metadata: model.metadata().clone(),
    }
}

fn model_from_file(file: FileModel) -> Result<SdfModel> {
    let config = file.config;
    config.validate().map_err(|e| Error::model(e.to_string()))?;
    let m = config.forests_per_level;
    let folds = config.cv_folds;

    let mut levels = Vec::with_capacity(file.levels.len());
    for (level_idx, file_level) in file.levels.into_iter().enumerate() {
        if file_level.forests.len() != m * folds {
            return Err(Error::model(format!(
                "level {}: {} forests stored, config grid is {m}x{folds}",
                level_idx + 1,
                file_level.forests.len()
            )));
        }
        let mut forests = Vec::with_capacity(m * folds);
        for (grid_idx, file_forest) in file_level.forests.into_iter().enumerate() {
            let slot = grid_idx / folds;
            let fold = grid_idx % folds;
            let context = format!("level {} slot {slot} fold {fold}", level_idx + 1);
            let expected_kind = if slot < m / 2 {
                TreeKind::RandomForest
            } else {
                TreeKind::CompleteRandom
            };
            if file_forest.kind != expected_kind {
                return Err(Error::model(format!(
                    "{context}: kind {:?} does not match slot layout",
                    file_forest.kind
                )));
            }
            forests.push(forest_from_file(
                file_forest,
                file_level.input_width,
                config.trees_per_forest,
                &context,
            )?);
        }
        levels.push(
            Level::from_parts(forests, m, folds, file_level.input_width)
                .map_err(|e| Error::model(format!("level {}: {e}", level_idx + 1)))?,
        );
    }

    let scanners = match file.scanning {
        None => None,
        Some(file_scanners) => {
            let mut sizes = Vec::with_capacity(file_scanners.sizes.len());
            for file_size in file_scanners.sizes {
                let size = file_size.size;
                let window_width = match config.scanning.shape {
                    ScanShape::Vector1d => 2 * size,
                    ScanShape::Image2d { .. } => 2 * size * size,
                };
                let mut forests = Vec::with_capacity(file_size.forests.len());
                for (i, f) in file_size.forests.into_iter().enumerate() {
                    let context = format!("scanner size {size} forest {i}");
                    forests.push(forest_from_file(
                        f,
                        window_width,
                        config.scanning.trees_per_forest,
                        &context,
                    )?);
                }
                sizes.push(SizeScanner { size, forests });
            }
            Some(Scanners::from_parts(config.scanning.clone(), sizes, file.d)?)
        }
    };

    SdfModel::from_parts(levels, config, file.d, scanners, file.metadata)
}

/// Serialize any value as canonical JSON: sorted object keys, shortest
/// round-trip floats, trailing newline.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String> {
    // serde_json maps are BTreeMaps, so converting through Value sorts keys.
    let value = serde_json::to_value(value)
        .map_err(|e| Error::invariant(format!("serialization failed: {e}")))?;
    let mut text = serde_json::to_string(&value)
        .map_err(|e| Error::invariant(format!("serialization failed: {e}")))?;
    text.push('\n');
    Ok(text)
}

/// Write a model as canonical JSON. Identical models produce byte-identical
/// files.
pub fn save_model(model: &SdfModel, path: &Path) -> Result<()> {
    let text = canonical_json(&model_to_file(model))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Load and fully validate a model file.
pub fn load_model(path: &Path) -> Result<SdfModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::model(format!("{}: invalid JSON: {e}", path.display())))?;
    let version = value
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::model(format!("{}: missing format_version", path.display())))?;
    if version != u64::from(FORMAT_VERSION) {
        return Err(Error::model(format!(
            "{}: format_version {version} unsupported (expected {FORMAT_VERSION})",
            path.display()
        )));
    }
    let file: FileModel = serde_json::from_value(value)
        .map_err(|e| Error::model(format!("{}: schema violation: {e}", path.display())))?;
    model_from_file(file).map_err(|e| match e {
        Error::Model(msg) => Error::model(format!("{}: {msg}", path.display())),
        other => other,
    })
}
