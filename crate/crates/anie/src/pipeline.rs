//! End-to-end fitting and the on-disk artifact bundle shared by the CLI and
//! the C bindings.
//!
//! `fit_stream` runs rescale -> project -> truncated SVD -> affinity
//! thresholding. A fit bundle on disk holds `subspace.csv`, `scree.csv`,
//! `affinity.json`, `mask.json` and `manifest.json`; the manifest records
//! the exact configuration (and no timestamps), so a rerun with the same
//! seed reproduces every file byte for byte. Files are written through a
//! temporary sibling and renamed into place.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::affinity::{AffinityExport, AffinityResult, compute_affinity};
use crate::basis::{BasisDescriptor, BasisSet};
use crate::coeffs::{CoeffSet, ProjectOptions, project};
use crate::error::{Error, Result};
use crate::events::{EventStream, rescale};
use crate::model::IntensityModel;
use crate::subspace::{SubspaceEstimate, build_x, scree, truncated_svd};

/// Fit parameters. `basis` wins over `levels` when both are set.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    /// Haar detail levels (B = 2^levels) when no explicit basis is given.
    pub levels: u32,
    /// Subspace rank D.
    pub rank: usize,
    /// FDR level for the significance mask.
    pub alpha: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<BasisDescriptor>,
    #[serde(default)]
    pub include_self_loops: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            levels: 6,
            rank: 2,
            alpha: 0.05,
            seed: 0,
            basis: None,
            include_self_loops: false,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::Parameter("rank must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Parameter(format!(
                "alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    pub fn basis(&self) -> Result<BasisSet> {
        match &self.basis {
            Some(desc) => BasisSet::from_descriptor(desc),
            None => BasisSet::from_descriptor(&BasisDescriptor::Haar {
                levels: self.levels,
            }),
        }
    }
}

/// Everything the fit produces in memory.
#[derive(Debug, Clone)]
pub struct FitOutput {
    pub basis: BasisSet,
    pub coeffs: CoeffSet,
    pub subspace: SubspaceEstimate,
    pub affinity: AffinityResult,
    pub n_events: usize,
}

/// Runs the full estimation pipeline on a (possibly unnormalized) stream.
pub fn fit_stream(stream: &EventStream, config: &FitConfig) -> Result<FitOutput> {
    config.validate()?;
    let normalized = rescale(stream)?;
    let basis = config.basis()?;
    let coeffs = project(
        &normalized,
        &basis,
        ProjectOptions {
            include_self_loops: config.include_self_loops,
        },
    )?;
    let x = build_x(&coeffs);
    let subspace = truncated_svd(&x, config.rank, config.seed)?;
    let affinity = compute_affinity(&coeffs, &subspace, &basis, config.alpha, None)?;
    Ok(FitOutput {
        basis,
        coeffs,
        subspace,
        affinity,
        n_events: normalized.len(),
    })
}

impl FitOutput {
    pub fn into_model(self) -> Result<IntensityModel> {
        IntensityModel::new(self.subspace, self.affinity, self.basis)
    }

    pub fn model(&self) -> Result<IntensityModel> {
        IntensityModel::new(
            self.subspace.clone(),
            self.affinity.clone(),
            self.basis.clone(),
        )
    }
}

/// Bundle manifest: configuration and shape information, no timestamps.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub config: FitConfig,
    pub basis: BasisDescriptor,
    pub n_nodes: usize,
    pub n_events: usize,
    pub rank_deficient: bool,
}

/// Writes `bytes` through a temporary sibling and renames into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("out")
    ));
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(tmp.display().to_string(), e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

fn matrix_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            if c > 0 {
                out.push(',');
            }
            write!(out, "{}", m[(r, c)]).expect("write to string");
        }
        out.push('\n');
    }
    out
}

/// Writes the fit bundle into `dir` (created if missing).
pub fn write_fit_bundle(dir: &Path, output: &FitOutput, config: &FitConfig) -> Result<()> {
    write_bundle_parts(
        dir,
        &output.basis,
        &output.subspace,
        &output.affinity,
        config,
        output.n_events,
    )
}

/// Writes a bundle for an already-assembled model (used by the C interface).
pub fn write_model_bundle(
    dir: &Path,
    model: &IntensityModel,
    config: &FitConfig,
    n_events: usize,
) -> Result<()> {
    write_bundle_parts(
        dir,
        model.basis(),
        model.subspace(),
        model.affinity(),
        config,
        n_events,
    )
}

fn write_bundle_parts(
    dir: &Path,
    basis: &BasisSet,
    subspace: &SubspaceEstimate,
    affinity: &AffinityResult,
    config: &FitConfig,
    n_events: usize,
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;

    write_atomic(
        &dir.join("subspace.csv"),
        matrix_csv(subspace.u_hat()).as_bytes(),
    )?;

    let mut scree_csv = String::from("index,sigma\n");
    for (i, s) in scree(subspace) {
        writeln!(scree_csv, "{i},{s}").expect("write to string");
    }
    write_atomic(&dir.join("scree.csv"), scree_csv.as_bytes())?;

    let export = affinity.to_export();
    write_atomic(
        &dir.join("affinity.json"),
        serde_json::to_string_pretty(&export)
            .expect("affinity serializes")
            .as_bytes(),
    )?;

    let mask: Vec<Vec<u8>> = export.functions.iter().map(|f| f.mask.clone()).collect();
    write_atomic(
        &dir.join("mask.json"),
        serde_json::to_string_pretty(&mask)
            .expect("mask serializes")
            .as_bytes(),
    )?;

    let manifest = Manifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        basis: basis
            .descriptor()
            .unwrap_or(BasisDescriptor::Haar { levels: 0 }),
        n_nodes: subspace.n_nodes(),
        n_events,
        rank_deficient: subspace.rank_deficient(),
    };
    write_atomic(
        &dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)
            .expect("manifest serializes")
            .as_bytes(),
    )?;
    Ok(())
}

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_to_string(path)?).map_err(|e| Error::Schema {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    parse_json(&dir.join("manifest.json"))
}

/// Reloads a fitted model from a bundle directory.
pub fn load_model(dir: &Path) -> Result<IntensityModel> {
    let manifest: Manifest = read_manifest(dir)?;
    let basis = BasisSet::from_descriptor(&manifest.basis)?;

    let sub_text = read_to_string(&dir.join("subspace.csv"))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in sub_text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|v| v.trim().parse::<f64>()).collect();
        rows.push(row.map_err(|e| Error::Parse {
            line: i + 1,
            message: format!("subspace.csv: {e}"),
        })?);
    }
    if rows.is_empty() {
        return Err(Error::Validation("subspace.csv is empty".into()));
    }
    let d = rows[0].len();
    if rows.iter().any(|r| r.len() != d) {
        return Err(Error::Validation("ragged subspace.csv".into()));
    }
    let flat: Vec<f64> = rows.iter().flatten().cloned().collect();
    let u_hat = DMatrix::from_row_slice(rows.len(), d, &flat);
    let subspace = SubspaceEstimate::from_matrix(u_hat)?;

    let export: AffinityExport = parse_json(&dir.join("affinity.json"))?;
    let affinity = AffinityResult::from_export(&export)?;
    IntensityModel::new(subspace, affinity, basis)
}

/// Canonical file names inside a bundle.
pub fn bundle_files() -> [&'static str; 5] {
    [
        "subspace.csv",
        "scree.csv",
        "affinity.json",
        "mask.json",
        "manifest.json",
    ]
}

/// Convenience: bundle directory contents as byte vectors, for determinism
/// checks and the C interface.
pub fn read_bundle_bytes(dir: &Path) -> Result<Vec<(PathBuf, Vec<u8>)>> {
    bundle_files()
        .iter()
        .map(|name| {
            let p = dir.join(name);
            let bytes = std::fs::read(&p).map_err(|e| Error::io(p.display().to_string(), e))?;
            Ok((p, bytes))
        })
        .collect()
}
