//! File formats.
//!
//! A dataset directory holds
//!
//! * `manifest.json` - `J`, `P`, the static table path and the ordered slice
//!   list (`entity_id`, row count, relative path);
//! * one coordinate file per slice: `row col value` per line, zero-based,
//!   values written with 17 significant digits, `#` starts a comment;
//! * `static.csv` - header `entity_id,<feature names>` then one row per
//!   entity in slice order.
//!
//! A factor directory holds `meta.json` plus whitespace-separated dense
//! matrices `H.txt`, `V.txt`, `F.txt`, `W.txt`, and `Q.txt` / `U.txt` with the
//! per-entity blocks stacked in entity order.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{FactorSet, IrregularTensor, ModelShape, Slice, SparseSlice, StaticMatrix};
use crate::{Error, Mat, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
const STATIC_FILE: &str = "static.csv";
const META_FILE: &str = "meta.json";

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    n_features: usize,
    n_static: usize,
    static_table: String,
    slices: Vec<ManifestSlice>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestSlice {
    entity_id: String,
    rows: usize,
    path: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct FactorMeta {
    rank: usize,
    lambda: f64,
    mu: f64,
    n_features: usize,
    n_static: usize,
    entity_ids: Vec<String>,
    slice_rows: Vec<usize>,
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Accepts either a manifest file or a directory containing one.
pub fn resolve_manifest(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(MANIFEST_FILE)
    } else {
        path.to_path_buf()
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    fs::File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Loads and validates a dataset. `manifest_path` may be the manifest file
/// or its directory; slice and table paths resolve relative to it.
pub fn load_dataset(manifest_path: impl AsRef<Path>) -> Result<(IrregularTensor, StaticMatrix)> {
    let manifest_path = resolve_manifest(manifest_path.as_ref());
    let base = manifest_path.parent().map(Path::to_path_buf).unwrap_or_default();
    let text = read_to_string(&manifest_path)?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| Error::parse(&manifest_path, e.line(), e.to_string()))?;

    let mut slices = Vec::with_capacity(manifest.slices.len());
    for entry in &manifest.slices {
        let path = base.join(&entry.path);
        let data = read_coo(&path, entry.rows, manifest.n_features).map_err(|e| match e {
            Error::Invalid(msg) => Error::Invalid(format!("slice `{}`: {msg}", entry.entity_id)),
            other => other,
        })?;
        slices.push(Slice { entity_id: entry.entity_id.clone(), data });
    }
    let tensor = IrregularTensor::new(slices, manifest.n_features)?;

    let static_path = base.join(&manifest.static_table);
    let static_matrix = read_static(&static_path)?;
    if static_matrix.n_cols() != manifest.n_static {
        return Err(Error::Dimension(format!(
            "{} has {} feature columns, manifest says {}",
            static_path.display(),
            static_matrix.n_cols(),
            manifest.n_static
        )));
    }
    static_matrix.check_aligned(&tensor)?;
    Ok((tensor, static_matrix))
}

/// Writes a dataset into `dir` and returns the manifest path.
pub fn save_dataset(tensor: &IrregularTensor, static_matrix: &StaticMatrix, dir: impl AsRef<Path>) -> Result<PathBuf> {
    static_matrix.check_aligned(tensor)?;
    let dir = dir.as_ref();
    create_dir(&dir.join("slices"))?;

    let mut entries = Vec::with_capacity(tensor.n_slices());
    for (k, s) in tensor.slices().iter().enumerate() {
        let rel = format!("slices/{k:06}.coo");
        write_coo(&dir.join(&rel), &s.data)?;
        entries.push(ManifestSlice { entity_id: s.entity_id.clone(), rows: s.data.nrows(), path: rel });
    }
    write_static(&dir.join(STATIC_FILE), static_matrix)?;

    let manifest = Manifest {
        n_features: tensor.n_features(),
        n_static: static_matrix.n_cols(),
        static_table: STATIC_FILE.into(),
        slices: entries,
    };
    let path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn write_coo(path: &Path, s: &SparseSlice) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "# {} {} {}", s.nrows(), s.ncols(), s.nnz()).map_err(io)?;
    for (i, j, v) in s.triplets() {
        writeln!(w, "{i} {j} {}", fmt_f64(v)).map_err(io)?;
    }
    w.flush().map_err(io)
}

fn read_coo(path: &Path, rows: usize, cols: usize) -> Result<SparseSlice> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut triplets = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let (Some(i), Some(j), Some(v), None) = (it.next(), it.next(), it.next(), it.next()) else {
            return Err(Error::parse(path, n + 1, "expected `row col value`"));
        };
        let i: usize = i.parse().map_err(|_| Error::parse(path, n + 1, format!("bad row index `{i}`")))?;
        let j: usize = j.parse().map_err(|_| Error::parse(path, n + 1, format!("bad column index `{j}`")))?;
        let v: f64 = v.parse().map_err(|_| Error::parse(path, n + 1, format!("bad value `{v}`")))?;
        triplets.push((i, j, v));
    }
    SparseSlice::from_triplets(rows, cols, triplets)
        .map_err(|e| Error::Invalid(format!("{}: {}", path.display(), strip_invalid(e))))
}

fn strip_invalid(e: Error) -> String {
    match e {
        Error::Invalid(m) => m,
        other => other.to_string(),
    }
}

fn write_static(path: &Path, a: &StaticMatrix) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut header = vec!["entity_id".to_string()];
    header.extend(a.feature_names().iter().cloned());
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (k, id) in a.entity_ids().iter().enumerate() {
        let mut rec = vec![id.clone()];
        rec.extend(a.values().row(k).iter().map(|&v| fmt_f64(v)));
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, line, format!("{other:?}")),
    }
}

fn read_static(path: &Path) -> Result<StaticMatrix> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.get(0) != Some("entity_id") {
        return Err(Error::parse(path, 1, "first header column must be `entity_id`"));
    }
    let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut ids = Vec::new();
    let mut values = Vec::new();
    for (n, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = n + 2;
        ids.push(rec.get(0).unwrap_or_default().to_string());
        for (c, field) in rec.iter().skip(1).enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::parse(path, line, format!("bad value `{field}` in column {}", c + 1)))?;
            values.push(v);
        }
    }
    let m = Mat::from_row_slice(ids.len(), names.len(), &values);
    StaticMatrix::new(ids, names, m)
}

fn write_dense(path: &Path, blocks: &[&Mat]) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    for m in blocks {
        for i in 0..m.nrows() {
            let row: Vec<String> = m.row(i).iter().map(|&v| fmt_f64(v)).collect();
            writeln!(w, "{}", row.join(" ")).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

fn read_dense(path: &Path, rows: usize, cols: usize) -> Result<Mat> {
    let text = read_to_string(path)?;
    let mut values = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        seen += 1;
        let before = values.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| Error::parse(path, n + 1, format!("bad value `{tok}`")))?;
            values.push(v);
        }
        if values.len() - before != cols {
            return Err(Error::parse(path, n + 1, format!("expected {cols} values, found {}", values.len() - before)));
        }
    }
    if seen != rows {
        return Err(Error::parse(path, seen, format!("expected {rows} rows, found {seen}")));
    }
    Ok(Mat::from_row_slice(rows, cols, &values))
}

/// Writes a factor set into `dir`.
pub fn save_factors(factors: &FactorSet, dir: impl AsRef<Path>) -> Result<()> {
    factors.validate()?;
    let dir = dir.as_ref();
    create_dir(dir)?;
    let meta = FactorMeta {
        rank: factors.shape.rank,
        lambda: factors.shape.lambda,
        mu: factors.shape.mu,
        n_features: factors.v.nrows(),
        n_static: factors.f.nrows(),
        entity_ids: factors.entity_ids.clone(),
        slice_rows: factors.u.iter().map(|u| u.nrows()).collect(),
    };
    let path = dir.join(META_FILE);
    let json = serde_json::to_string_pretty(&meta).expect("meta serializes");
    fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
    write_dense(&dir.join("H.txt"), &[&factors.h])?;
    write_dense(&dir.join("V.txt"), &[&factors.v])?;
    write_dense(&dir.join("F.txt"), &[&factors.f])?;
    write_dense(&dir.join("W.txt"), &[&factors.w])?;
    write_dense(&dir.join("Q.txt"), &factors.q.iter().collect::<Vec<_>>())?;
    write_dense(&dir.join("U.txt"), &factors.u.iter().collect::<Vec<_>>())?;
    Ok(())
}

/// Loads a factor set and re-validates every invariant.
pub fn load_factors(dir: impl AsRef<Path>) -> Result<FactorSet> {
    let dir = dir.as_ref();
    let path = dir.join(META_FILE);
    let meta: FactorMeta =
        serde_json::from_str(&read_to_string(&path)?).map_err(|e| Error::parse(&path, e.line(), e.to_string()))?;
    let r = meta.rank;
    let k = meta.entity_ids.len();
    if meta.slice_rows.len() != k {
        return Err(Error::parse(&path, 0, "slice_rows and entity_ids differ in length"));
    }
    let total: usize = meta.slice_rows.iter().sum();
    let split = |m: Mat| -> Vec<Mat> {
        let mut out = Vec::with_capacity(k);
        let mut start = 0;
        for &n in &meta.slice_rows {
            out.push(m.rows(start, n).into_owned());
            start += n;
        }
        out
    };
    let factors = FactorSet {
        entity_ids: meta.entity_ids.clone(),
        h: read_dense(&dir.join("H.txt"), r, r)?,
        v: read_dense(&dir.join("V.txt"), meta.n_features, r)?,
        f: read_dense(&dir.join("F.txt"), meta.n_static, r)?,
        w: read_dense(&dir.join("W.txt"), k, r)?,
        q: split(read_dense(&dir.join("Q.txt"), total, r)?),
        u: split(read_dense(&dir.join("U.txt"), total, r)?),
        shape: ModelShape { rank: r, lambda: meta.lambda, mu: meta.mu },
    };
    factors.validate()?;
    Ok(factors)
}

/// Writes an entity-keyed dense table (`entity_id,phenotype_0,...`).
pub fn write_score_table(path: impl AsRef<Path>, entity_ids: &[String], scores: &Mat) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut header = vec!["entity_id".to_string()];
    header.extend((0..scores.ncols()).map(|r| format!("phenotype_{r}")));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (k, id) in entity_ids.iter().enumerate() {
        let mut rec = vec![id.clone()];
        rec.extend(scores.row(k).iter().map(|&v| fmt_f64(v)));
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a table written by [`write_score_table`].
pub fn read_score_table(path: impl AsRef<Path>) -> Result<(Vec<String>, Mat)> {
    let a = read_static(path.as_ref())?;
    Ok((a.entity_ids().to_vec(), a.values().clone()))
}
