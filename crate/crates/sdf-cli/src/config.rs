//! JSON config file: partial overrides merged onto the default cascade
//! settings. Unknown keys are rejected.

use std::path::Path;

use serde::Deserialize;

use sdf_core::{
    Augmentation, CascadeConfig, Error, Result, ScanConfig, ScanShape, ZSchedule,
};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    max_levels: Option<usize>,
    forests_per_level: Option<usize>,
    trees_per_forest: Option<usize>,
    cv_folds: Option<usize>,
    lambda: Option<f64>,
    z_schedule: Option<ZSchedule>,
    augmentation: Option<Augmentation>,
    val_fraction: Option<f64>,
    epsilon_gain: Option<f64>,
    tau: Option<f64>,
    scanning: Option<FileScanConfig>,
    qp: Option<FileQpConfig>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileQpConfig {
    tol: Option<f64>,
    max_iter: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileScanConfig {
    enabled: Option<bool>,
    shape: Option<String>,
    height: Option<usize>,
    width: Option<usize>,
    window_fractions: Option<Vec<u32>>,
    trees_per_forest: Option<usize>,
}

/// Build a cascade config from an optional JSON file plus the root seed.
pub fn load_cascade_config(path: Option<&Path>, seed: u64) -> Result<CascadeConfig> {
    let file: FileConfig = match path {
        None => FileConfig::default(),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str(&text)
                .map_err(|e| Error::config(format!("{}: {e}", p.display())))?
        }
    };

    let mut cfg = CascadeConfig {
        seed,
        ..CascadeConfig::default()
    };
    if let Some(v) = file.max_levels {
        cfg.max_levels = v;
    }
    if let Some(v) = file.forests_per_level {
        cfg.forests_per_level = v;
    }
    if let Some(v) = file.trees_per_forest {
        cfg.trees_per_forest = v;
    }
    if let Some(v) = file.cv_folds {
        cfg.cv_folds = v;
    }
    if let Some(v) = file.lambda {
        cfg.qp.lambda = v;
    }
    if let Some(v) = file.z_schedule {
        cfg.z_schedule = v;
    }
    if let Some(v) = file.augmentation {
        cfg.augmentation = v;
    }
    if let Some(v) = file.val_fraction {
        cfg.val_fraction = v;
    }
    if let Some(v) = file.epsilon_gain {
        cfg.epsilon_gain = v;
    }
    if let Some(v) = file.tau {
        cfg.tau = v;
    }
    if let Some(qp) = file.qp {
        if let Some(v) = qp.tol {
            cfg.qp.tol = v;
        }
        if let Some(v) = qp.max_iter {
            cfg.qp.max_iter = v;
        }
    }
    if let Some(scan) = file.scanning {
        cfg.scanning = build_scan_config(scan)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn build_scan_config(file: FileScanConfig) -> Result<ScanConfig> {
    let shape = match file.shape.as_deref() {
        None | Some("vector_1d") => ScanShape::Vector1d,
        Some("image_2d") => {
            let (Some(height), Some(width)) = (file.height, file.width) else {
                return Err(Error::config(
                    "scanning shape image_2d requires height and width".to_string(),
                ));
            };
            ScanShape::Image2d { height, width }
        }
        Some(other) => {
            return Err(Error::config(format!(
                "unknown scanning shape {other:?} (expected vector_1d or image_2d)"
            )));
        }
    };
    if matches!(shape, ScanShape::Vector1d) && (file.height.is_some() || file.width.is_some()) {
        return Err(Error::config(
            "height/width only apply to scanning shape image_2d".to_string(),
        ));
    }
    let mut cfg = match shape {
        ScanShape::Vector1d => ScanConfig::vector(30),
        ScanShape::Image2d { height, width } => ScanConfig::image(height, width, 30),
    };
    cfg.enabled = file.enabled.unwrap_or(false);
    if let Some(fractions) = file.window_fractions {
        cfg.window_fractions = fractions;
    }
    if let Some(t) = file.trees_per_forest {
        cfg.trees_per_forest = t;
    }
    Ok(cfg)
}
