//! File formats: dense numeric CSV, label matrices, image-half splits, the
//! binary model bundle, and the CSV tables each command emits.
//!
//! All writes go through [`atomic_write`] (temp file plus rename in the
//! target directory), and all floating-point output uses Rust's shortest
//! round-trip formatting, so re-reading a written file recovers the exact
//! values and re-running a command reproduces files byte for byte.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use iokr::evalbench::mean_and_stderr;
use iokr::subspace::Provenance;
use iokr::{DecodeResult, KernelSpec, ReportRow, RidgeModel, SlopeFit, SubspaceProjection};

use crate::config::DatasetSource;
use crate::errors::{CliError, Result};

// ---------------------------------------------------------------------------
// Atomic writes
// ---------------------------------------------------------------------------

/// Writes `bytes` to `path` via a temporary file in the same directory,
/// renamed into place on success.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::Builder::new()
        .prefix(".tmp-")
        .tempfile_in(dir)
        .map_err(|e| CliError::in_file(path, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::in_file(path, e))?;
    tmp.persist(path).map_err(|e| CliError::in_file(path, e.error))?;
    Ok(())
}

/// Serializes a value as pretty JSON (newline-terminated) to `path`.
pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| CliError::in_file(path, e))?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

// ---------------------------------------------------------------------------
// Dense numeric CSV
// ---------------------------------------------------------------------------

/// Reads a headerless CSV of finite numbers into an `n x d` matrix.
///
/// Every row must have the same number of fields; malformed fields and
/// non-finite values are reported with their line number.
pub fn read_dense_csv(path: &Path) -> Result<Array2<f64>> {
    let file = fs::File::open(path).map_err(|e| CliError::in_file(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut values: Vec<f64> = Vec::new();
    let mut width: Option<usize> = None;
    let mut rows = 0usize;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::in_file(path, e))?;
        let line = record
            .position()
            .map(|p| p.line())
            .unwrap_or((i + 1) as u64);
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(CliError::Data(format!(
                    "{}: line {}: expected {} fields, found {}",
                    path.display(),
                    line,
                    w,
                    record.len()
                )));
            }
            Some(_) => {}
        }
        for field in record.iter() {
            let v: f64 = field.parse().map_err(|_| {
                CliError::Data(format!(
                    "{}: line {}: `{}` is not a number",
                    path.display(),
                    line,
                    field
                ))
            })?;
            if !v.is_finite() {
                return Err(CliError::Data(format!(
                    "{}: line {}: non-finite value `{}`",
                    path.display(),
                    line,
                    field
                )));
            }
            values.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(CliError::Data(format!("{}: empty file", path.display())));
    }
    let width = width.unwrap_or(0);
    if width == 0 {
        return Err(CliError::Data(format!(
            "{}: rows have no fields",
            path.display()
        )));
    }
    Array2::from_shape_vec((rows, width), values)
        .map_err(|e| CliError::in_file(path, e))
}

/// Writes a matrix as headerless CSV, one row per line.
pub fn write_dense_csv(path: &Path, m: ArrayView2<'_, f64>) -> Result<()> {
    let mut text = String::new();
    for row in m.outer_iter() {
        push_joined(&mut text, row.iter().map(|v| v.to_string()));
    }
    atomic_write(path, text.as_bytes())
}

fn push_joined(text: &mut String, fields: impl Iterator<Item = String>) {
    let mut first = true;
    for f in fields {
        if !first {
            text.push(',');
        }
        text.push_str(&f);
        first = false;
    }
    text.push('\n');
}

// ---------------------------------------------------------------------------
// Label files
// ---------------------------------------------------------------------------

/// A binary label matrix with one name per column.
#[derive(Debug, Clone)]
pub struct LabelMatrix {
    pub y: Array2<f64>,
    pub label_names: Vec<String>,
}

/// Reads a label file in either sparse or dense form.
///
/// Sparse form: one example per line, whitespace- or comma-separated
/// `label:1` tokens with 0-based integer labels; an empty line is an example
/// with no labels. An optional first line `#labels=K` fixes the label count
/// (otherwise it is the largest index seen plus one). Dense form: a 0/1 CSV,
/// optionally starting with a header row of label names. Any other value is
/// rejected with its line number.
pub fn read_label_file(path: &Path) -> Result<LabelMatrix> {
    let text = fs::read_to_string(path).map_err(|e| CliError::in_file(path, e))?;
    let lines: Vec<&str> = text.lines().collect();
    if lines.is_empty() {
        return Err(CliError::Data(format!("{}: empty file", path.display())));
    }
    let mut start = 0usize;
    let mut declared: Option<usize> = None;
    if let Some(rest) = lines[0].trim().strip_prefix("#labels=") {
        declared = Some(rest.trim().parse().map_err(|_| {
            CliError::Data(format!(
                "{}: line 1: bad label count `{}`",
                path.display(),
                rest
            ))
        })?);
        start = 1;
    }
    let body = &lines[start..];
    if body.is_empty() {
        return Err(CliError::Data(format!(
            "{}: no data rows",
            path.display()
        )));
    }
    let sparse = declared.is_some() || body.iter().any(|l| l.contains(':'));
    if sparse {
        read_sparse_labels(path, body, start, declared)
    } else {
        read_dense_labels(path, body, start)
    }
}

fn read_sparse_labels(
    path: &Path,
    body: &[&str],
    offset: usize,
    declared: Option<usize>,
) -> Result<LabelMatrix> {
    let mut rows: Vec<Vec<usize>> = Vec::with_capacity(body.len());
    let mut max_label: Option<usize> = None;
    for (i, raw) in body.iter().enumerate() {
        let line = offset + i + 1;
        let mut labels = Vec::new();
        for token in raw.split([',', ' ', '\t']).filter(|t| !t.is_empty()) {
            let (idx, val) = token.split_once(':').ok_or_else(|| {
                CliError::Data(format!(
                    "{}: line {}: token `{}` is not `label:1`",
                    path.display(),
                    line,
                    token
                ))
            })?;
            let idx: usize = idx.trim().parse().map_err(|_| {
                CliError::Data(format!(
                    "{}: line {}: bad label index `{}`",
                    path.display(),
                    line,
                    idx
                ))
            })?;
            if val.trim() != "1" {
                return Err(CliError::Data(format!(
                    "{}: line {}: label value must be 1, got `{}`",
                    path.display(),
                    line,
                    val
                )));
            }
            if let Some(k) = declared {
                if idx >= k {
                    return Err(CliError::Data(format!(
                        "{}: line {}: label {} out of range (declared {})",
                        path.display(),
                        line,
                        idx,
                        k
                    )));
                }
            }
            max_label = Some(max_label.map_or(idx, |m| m.max(idx)));
            labels.push(idx);
        }
        rows.push(labels);
    }
    let d = match declared.or(max_label.map(|m| m + 1)) {
        Some(d) => d,
        None => {
            return Err(CliError::Data(format!(
                "{}: no labels found and no #labels= directive",
                path.display()
            )))
        }
    };
    let mut y = Array2::zeros((rows.len(), d));
    for (i, labels) in rows.iter().enumerate() {
        for &j in labels {
            y[[i, j]] = 1.0;
        }
    }
    Ok(LabelMatrix {
        y,
        label_names: (0..d).map(|i| format!("label_{i}")).collect(),
    })
}

fn read_dense_labels(path: &Path, body: &[&str], offset: usize) -> Result<LabelMatrix> {
    let parse_row = |raw: &str| -> Option<Vec<f64>> {
        let fields: Vec<&str> = raw.split(',').map(str::trim).collect();
        let mut out = Vec::with_capacity(fields.len());
        for f in &fields {
            out.push(f.parse::<f64>().ok()?);
        }
        Some(out)
    };
    // A non-numeric first row is a header of label names.
    let (names, data_start) = match parse_row(body[0]) {
        Some(_) => (None, 0usize),
        None => (
            Some(
                body[0]
                    .split(',')
                    .map(|s| s.trim().to_string())
                    .collect::<Vec<_>>(),
            ),
            1usize,
        ),
    };
    let data = &body[data_start..];
    if data.is_empty() {
        return Err(CliError::Data(format!(
            "{}: header but no data rows",
            path.display()
        )));
    }
    let mut values = Vec::new();
    let mut width: Option<usize> = None;
    for (i, raw) in data.iter().enumerate() {
        let line = offset + data_start + i + 1;
        let row = parse_row(raw).ok_or_else(|| {
            CliError::Data(format!(
                "{}: line {}: row is not numeric",
                path.display(),
                line
            ))
        })?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(CliError::Data(format!(
                    "{}: line {}: expected {} fields, found {}",
                    path.display(),
                    line,
                    w,
                    row.len()
                )));
            }
            Some(_) => {}
        }
        for v in row {
            if v != 0.0 && v != 1.0 {
                return Err(CliError::Data(format!(
                    "{}: line {}: label value must be 0 or 1, got `{}`",
                    path.display(),
                    line,
                    v
                )));
            }
            values.push(v);
        }
    }
    let d = width.unwrap_or(0);
    if d == 0 {
        return Err(CliError::Data(format!(
            "{}: rows have no fields",
            path.display()
        )));
    }
    if let Some(names) = &names {
        if names.len() != d {
            return Err(CliError::Data(format!(
                "{}: header has {} names but rows have {} fields",
                path.display(),
                names.len(),
                d
            )));
        }
    }
    let y = Array2::from_shape_vec((data.len(), d), values)
        .map_err(|e| CliError::in_file(path, e))?;
    Ok(LabelMatrix {
        label_names: names.unwrap_or_else(|| (0..d).map(|i| format!("label_{i}")).collect()),
        y,
    })
}

// ---------------------------------------------------------------------------
// Image-half splits
// ---------------------------------------------------------------------------

/// Reads a dense CSV of row-major images and splits each row into a top half
/// (inputs) and bottom half (outputs).
///
/// Rows with an odd number of fields are assumed to carry a leading class
/// label, which is dropped. The pixel count must be even.
pub fn read_usps_halves(path: &Path) -> Result<(Array2<f64>, Array2<f64>)> {
    let m = read_dense_csv(path)?;
    let pixels = if m.ncols() % 2 == 1 {
        m.slice(s![.., 1..])
    } else {
        m.view()
    };
    let half = pixels.ncols() / 2;
    if half == 0 {
        return Err(CliError::Data(format!(
            "{}: rows too narrow to split into halves",
            path.display()
        )));
    }
    Ok((
        pixels.slice(s![.., ..half]).to_owned(),
        pixels.slice(s![.., half..]).to_owned(),
    ))
}

/// Loads the input and output matrices named by a dataset source, checking
/// that their row counts agree. The third element holds label names for
/// multilabel sources.
pub fn load_dataset(
    src: &DatasetSource,
) -> Result<(Array2<f64>, Array2<f64>, Option<Vec<String>>)> {
    let (x, y, names) = match src {
        DatasetSource::Dense { inputs, outputs } => {
            (read_dense_csv(inputs)?, read_dense_csv(outputs)?, None)
        }
        DatasetSource::Multilabel { inputs, labels } => {
            let x = read_dense_csv(inputs)?;
            let lm = read_label_file(labels)?;
            (x, lm.y, Some(lm.label_names))
        }
        DatasetSource::UspsHalves { images } => {
            let (x, y) = read_usps_halves(images)?;
            (x, y, None)
        }
    };
    if x.nrows() != y.nrows() {
        return Err(CliError::Data(format!(
            "dataset row mismatch: {} input rows vs {} output rows",
            x.nrows(),
            y.nrows()
        )));
    }
    Ok((x, y, names))
}

// ---------------------------------------------------------------------------
// Model bundle
// ---------------------------------------------------------------------------

pub const BUNDLE_VERSION: u32 = 1;

/// Everything `decode` needs, persisted by `train` as one binary file: the
/// prediction-stage ridge model (with raw training inputs), the fitted
/// projection, the training outputs, and the output kernel.
#[derive(Debug, Clone)]
pub struct ModelBundle {
    pub version: u32,
    pub model: RidgeModel<f64>,
    pub projection: SubspaceProjection<f64>,
    pub train_outputs: Array2<f64>,
    pub output_kernel: KernelSpec,
    pub lambda1: f64,
    pub lambda2: f64,
}

// The on-disk schema is spelled out separately from the in-memory types: it
// pins the file layout independently of the library structs, and it avoids
// internally tagged serde enums, which the binary encoding cannot
// deserialize.

#[derive(Serialize, Deserialize)]
enum RawKernel {
    Gaussian(f64),
    Linear,
    GaussianTanimoto(f64),
}

impl From<KernelSpec> for RawKernel {
    fn from(k: KernelSpec) -> Self {
        match k {
            KernelSpec::Gaussian { sigma2 } => RawKernel::Gaussian(sigma2),
            KernelSpec::Linear => RawKernel::Linear,
            KernelSpec::GaussianTanimoto { sigma2 } => RawKernel::GaussianTanimoto(sigma2),
        }
    }
}

impl From<RawKernel> for KernelSpec {
    fn from(k: RawKernel) -> Self {
        match k {
            RawKernel::Gaussian(sigma2) => KernelSpec::Gaussian { sigma2 },
            RawKernel::Linear => KernelSpec::Linear,
            RawKernel::GaussianTanimoto(sigma2) => KernelSpec::GaussianTanimoto { sigma2 },
        }
    }
}

#[derive(Serialize, Deserialize)]
enum RawProvenance {
    Supervised(f64),
    Unsupervised,
    Oracle,
}

impl From<Provenance> for RawProvenance {
    fn from(p: Provenance) -> Self {
        match p {
            Provenance::Supervised { lambda1 } => RawProvenance::Supervised(lambda1),
            Provenance::Unsupervised => RawProvenance::Unsupervised,
            Provenance::Oracle => RawProvenance::Oracle,
        }
    }
}

impl From<RawProvenance> for Provenance {
    fn from(p: RawProvenance) -> Self {
        match p {
            RawProvenance::Supervised(lambda1) => Provenance::Supervised { lambda1 },
            RawProvenance::Unsupervised => Provenance::Unsupervised,
            RawProvenance::Oracle => Provenance::Oracle,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct RawBundle {
    version: u32,
    w: Array2<f64>,
    lambda: f64,
    kernel: RawKernel,
    train_inputs: Option<Array2<f64>>,
    n: usize,
    rank_p: usize,
    requested_rank: usize,
    beta_coeffs: Array2<f64>,
    gamma: Array2<f64>,
    uy_train: Array2<f64>,
    kept_eigenvalues: Array1<f64>,
    provenance: RawProvenance,
    train_outputs: Array2<f64>,
    output_kernel: RawKernel,
    lambda1: f64,
    lambda2: f64,
}

impl From<ModelBundle> for RawBundle {
    fn from(b: ModelBundle) -> Self {
        RawBundle {
            version: b.version,
            w: b.model.w,
            lambda: b.model.lambda,
            kernel: b.model.kernel.into(),
            train_inputs: b.model.train_inputs,
            n: b.model.n,
            rank_p: b.projection.rank_p,
            requested_rank: b.projection.requested_rank,
            beta_coeffs: b.projection.beta_coeffs,
            gamma: b.projection.gamma,
            uy_train: b.projection.uy_train,
            kept_eigenvalues: b.projection.kept_eigenvalues,
            provenance: b.projection.provenance.into(),
            train_outputs: b.train_outputs,
            output_kernel: b.output_kernel.into(),
            lambda1: b.lambda1,
            lambda2: b.lambda2,
        }
    }
}

impl From<RawBundle> for ModelBundle {
    fn from(r: RawBundle) -> Self {
        ModelBundle {
            version: r.version,
            model: RidgeModel {
                w: r.w,
                lambda: r.lambda,
                kernel: r.kernel.into(),
                train_inputs: r.train_inputs,
                n: r.n,
            },
            projection: SubspaceProjection {
                rank_p: r.rank_p,
                requested_rank: r.requested_rank,
                beta_coeffs: r.beta_coeffs,
                gamma: r.gamma,
                uy_train: r.uy_train,
                kept_eigenvalues: r.kept_eigenvalues,
                provenance: r.provenance.into(),
            },
            train_outputs: r.train_outputs,
            output_kernel: r.output_kernel.into(),
            lambda1: r.lambda1,
            lambda2: r.lambda2,
        }
    }
}

pub fn save_bundle(path: &Path, bundle: &ModelBundle) -> Result<()> {
    let raw = RawBundle::from(bundle.clone());
    let bytes = bincode::serialize(&raw).map_err(|e| CliError::in_file(path, e))?;
    atomic_write(path, &bytes)
}

pub fn load_bundle(path: &Path) -> Result<ModelBundle> {
    let bytes = fs::read(path).map_err(|e| CliError::in_file(path, e))?;
    let raw: RawBundle = bincode::deserialize(&bytes).map_err(|e| CliError::in_file(path, e))?;
    if raw.version != BUNDLE_VERSION {
        return Err(CliError::Data(format!(
            "{}: unsupported bundle version {} (expected {})",
            path.display(),
            raw.version,
            BUNDLE_VERSION
        )));
    }
    let bundle = ModelBundle::from(raw);
    bundle.model.kernel.validate()?;
    bundle.output_kernel.validate()?;
    Ok(bundle)
}

// ---------------------------------------------------------------------------
// Command output tables
// ---------------------------------------------------------------------------

fn opt_string<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(T::to_string).unwrap_or_default()
}

/// Two-column `t,value` table of a regularity profile.
pub fn write_profile_csv(
    path: &Path,
    t_grid: ArrayView1<'_, f64>,
    values: ArrayView1<'_, f64>,
) -> Result<()> {
    let mut text = String::from("t,value\n");
    for (t, v) in t_grid.iter().zip(values.iter()) {
        push_joined(&mut text, [t.to_string(), v.to_string()].into_iter());
    }
    atomic_write(path, text.as_bytes())
}

/// Fitted log-log slopes, one row per profile.
pub fn write_slopes_csv(path: &Path, fits: &[(&str, SlopeFit)]) -> Result<()> {
    let mut text = String::from("profile,slope,intercept,r_squared,n_used\n");
    for (name, fit) in fits {
        push_joined(
            &mut text,
            [
                name.to_string(),
                fit.slope.to_string(),
                fit.intercept.to_string(),
                fit.r_squared.to_string(),
                fit.n_used.to_string(),
            ]
            .into_iter(),
        );
    }
    atomic_write(path, text.as_bytes())
}

/// Full metric-row dump of an experiment report.
pub fn write_report_csv(path: &Path, rows: &[ReportRow]) -> Result<()> {
    let mut text = String::from("experiment_id,seed,n,p,lambda1,lambda2,metric,value\n");
    for r in rows {
        push_joined(
            &mut text,
            [
                r.experiment_id.clone(),
                r.seed.to_string(),
                r.n.to_string(),
                opt_string(&r.p),
                opt_string(&r.lambda1),
                opt_string(&r.lambda2),
                r.metric_name.clone(),
                r.value.to_string(),
            ]
            .into_iter(),
        );
    }
    atomic_write(path, text.as_bytes())
}

/// Mean and standard error per metric name, sorted by name.
pub fn write_metric_summary_csv(path: &Path, rows: &[ReportRow]) -> Result<()> {
    let mut groups: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in rows {
        groups.entry(&r.metric_name).or_default().push(r.value);
    }
    let mut text = String::from("metric,mean,stderr,count\n");
    for (name, values) in groups {
        let (mean, stderr) = mean_and_stderr(&values)?;
        push_joined(
            &mut text,
            [
                name.to_string(),
                mean.to_string(),
                stderr.to_string(),
                values.len().to_string(),
            ]
            .into_iter(),
        );
    }
    atomic_write(path, text.as_bytes())
}

/// Ranked decode output: one row per (test point, rank) pair.
pub fn write_decode_csv(path: &Path, results: &[DecodeResult<f64>]) -> Result<()> {
    let mut text = String::from("test_id,rank,candidate_id,distance\n");
    for (test_id, res) in results.iter().enumerate() {
        for (i, (cand, dist)) in res.ranked_ids.iter().zip(res.distances.iter()).enumerate() {
            push_joined(
                &mut text,
                [
                    test_id.to_string(),
                    (i + 1).to_string(),
                    cand.to_string(),
                    dist.to_string(),
                ]
                .into_iter(),
            );
        }
    }
    atomic_write(path, text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn tmp_dir() -> tempfile::TempDir {
        tempfile::tempdir().expect("tempdir")
    }

    #[test]
    fn dense_csv_round_trips_exactly() {
        let dir = tmp_dir();
        let path = dir.path().join("m.csv");
        let m = array![[1.5, -2.25e-7, 3.0], [0.1, 1e30, -0.0]];
        write_dense_csv(&path, m.view()).unwrap();
        let back = read_dense_csv(&path).unwrap();
        assert_eq!(m, back);
        // A second write is byte-identical.
        let bytes = fs::read(&path).unwrap();
        write_dense_csv(&path, back.view()).unwrap();
        assert_eq!(bytes, fs::read(&path).unwrap());
    }

    #[test]
    fn dense_csv_reports_line_numbers() {
        let dir = tmp_dir();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "1,2\n3,oops\n").unwrap();
        let err = read_dense_csv(&path).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        fs::write(&path, "1,2\n3\n").unwrap();
        let err = read_dense_csv(&path).unwrap_err();
        assert!(err.to_string().contains("expected 2 fields"), "{err}");
        fs::write(&path, "1,2\nnan,4\n").unwrap();
        let err = read_dense_csv(&path).unwrap_err();
        assert!(err.to_string().contains("non-finite"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn dense_csv_rejects_empty_files() {
        let dir = tmp_dir();
        let path = dir.path().join("empty.csv");
        fs::write(&path, "").unwrap();
        let err = read_dense_csv(&path).unwrap_err();
        assert!(err.to_string().contains("empty"), "{err}");
    }

    #[test]
    fn sparse_labels_parse_with_directive_and_empty_rows() {
        let dir = tmp_dir();
        let path = dir.path().join("labels.txt");
        fs::write(&path, "#labels=4\n0:1 2:1\n\n3:1,1:1\n").unwrap();
        let lm = read_label_file(&path).unwrap();
        assert_eq!(lm.y.dim(), (3, 4));
        assert_eq!(lm.y.row(0).to_vec(), vec![1.0, 0.0, 1.0, 0.0]);
        assert_eq!(lm.y.row(1).to_vec(), vec![0.0; 4]);
        assert_eq!(lm.y.row(2).to_vec(), vec![0.0, 1.0, 0.0, 1.0]);
        assert_eq!(lm.label_names.len(), 4);
    }

    #[test]
    fn sparse_labels_reject_non_binary_values() {
        let dir = tmp_dir();
        let path = dir.path().join("labels.txt");
        fs::write(&path, "0:1\n1:2\n").unwrap();
        let err = read_label_file(&path).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert!(err.to_string().contains("must be 1"), "{err}");
    }

    #[test]
    fn sparse_labels_infer_width_from_max_index() {
        let dir = tmp_dir();
        let path = dir.path().join("labels.txt");
        fs::write(&path, "0:1\n5:1\n").unwrap();
        let lm = read_label_file(&path).unwrap();
        assert_eq!(lm.y.dim(), (2, 6));
    }

    #[test]
    fn dense_labels_accept_header_and_reject_non_binary() {
        let dir = tmp_dir();
        let path = dir.path().join("labels.csv");
        fs::write(&path, "cat,dog\n1,0\n0,1\n").unwrap();
        let lm = read_label_file(&path).unwrap();
        assert_eq!(lm.label_names, vec!["cat", "dog"]);
        assert_eq!(lm.y.dim(), (2, 2));
        fs::write(&path, "1,0\n0,0.5\n").unwrap();
        let err = read_label_file(&path).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert!(err.to_string().contains("0 or 1"), "{err}");
    }

    #[test]
    fn usps_halves_split_and_drop_leading_label() {
        let dir = tmp_dir();
        let path = dir.path().join("digits.csv");
        // 4 pixels per image plus a leading class label.
        fs::write(&path, "7,1,2,3,4\n3,5,6,7,8\n").unwrap();
        let (x, y) = read_usps_halves(&path).unwrap();
        assert_eq!(x, array![[1.0, 2.0], [5.0, 6.0]]);
        assert_eq!(y, array![[3.0, 4.0], [7.0, 8.0]]);
        // Even width: no label column.
        fs::write(&path, "1,2,3,4\n").unwrap();
        let (x, y) = read_usps_halves(&path).unwrap();
        assert_eq!(x, array![[1.0, 2.0]]);
        assert_eq!(y, array![[3.0, 4.0]]);
    }

    #[test]
    fn bundle_round_trips_and_checks_version() {
        let dir = tmp_dir();
        let path = dir.path().join("model.bundle");
        let bundle = ModelBundle {
            version: BUNDLE_VERSION,
            model: RidgeModel {
                w: array![[1.0, 0.0], [0.0, 1.0]],
                lambda: 0.1,
                kernel: KernelSpec::linear(),
                train_inputs: Some(array![[1.0], [2.0]]),
                n: 2,
            },
            projection: SubspaceProjection {
                rank_p: 1,
                requested_rank: 1,
                beta_coeffs: array![[1.0], [0.0]],
                gamma: array![[0.5], [0.5]],
                uy_train: array![[1.0], [2.0]],
                kept_eigenvalues: array![3.0],
                provenance: Provenance::Supervised { lambda1: 0.1 },
            },
            train_outputs: array![[1.0, 0.0], [0.0, 1.0]],
            output_kernel: KernelSpec::Gaussian { sigma2: 2.0 },
            lambda1: 0.1,
            lambda2: 0.1,
        };
        save_bundle(&path, &bundle).unwrap();
        let back = load_bundle(&path).unwrap();
        assert_eq!(back.model.w, bundle.model.w);
        assert_eq!(back.projection.uy_train, bundle.projection.uy_train);
        assert_eq!(back.train_outputs, bundle.train_outputs);
        assert_eq!(back.output_kernel, bundle.output_kernel);

        let wrong = ModelBundle {
            version: BUNDLE_VERSION + 1,
            ..bundle
        };
        save_bundle(&path, &wrong).unwrap();
        let err = load_bundle(&path).unwrap_err();
        assert!(err.to_string().contains("bundle version"), "{err}");
    }

    #[test]
    fn decode_csv_emits_one_row_per_rank() {
        let dir = tmp_dir();
        let path = dir.path().join("decode.csv");
        let results = vec![DecodeResult {
            ranked_ids: vec![2, 0],
            distances: vec![-1.5, 0.25],
            timing_ns: 10,
        }];
        write_decode_csv(&path, &results).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "test_id,rank,candidate_id,distance\n0,1,2,-1.5\n0,2,0,0.25\n"
        );
    }

    #[test]
    fn metric_summary_aggregates_by_name() {
        let dir = tmp_dir();
        let path = dir.path().join("summary.csv");
        let row = |name: &str, value: f64| ReportRow {
            experiment_id: "e".into(),
            seed: 1,
            n: 4,
            p: None,
            lambda1: None,
            lambda2: None,
            metric_name: name.into(),
            value,
        };
        write_metric_summary_csv(
            &path,
            &[row("b", 1.0), row("a", 2.0), row("b", 3.0)],
        )
        .unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "metric,mean,stderr,count");
        assert!(lines[1].starts_with("a,2,0,1"), "{}", lines[1]);
        assert!(lines[2].starts_with("b,2,1,2"), "{}", lines[2]);
    }
}
