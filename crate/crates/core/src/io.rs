//! CSV ingestion and the text model-file format.
//!
//! A model file is line oriented:
//!
//! ```text
//! spcrsvd-model 1
//! target y
//! covariates 3
//! x1
//! x2
//! x3
//! algorithm admm
//! intercept 1.2500000000000000e0
//! ...
//! matrix loadings 3 1
//! 5.7735026918962573e-1
//! ...
//! end
//! ```
//!
//! Scalars are `key value` pairs; matrices are a `matrix name rows cols`
//! header followed by one row per line. Floats are written with 17
//! significant digits, which round-trips every `f64` exactly. Iteration
//! traces are not stored.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, Read, Write};
use std::path::Path;

use crate::error::{Result, SpcrError};
use crate::kernels::{Mat, Vector};
use crate::model::{Algorithm, ConvergenceReport, FitConfig, Residuals, SpcrsvdModel, Transform};

pub const MODEL_FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "spcrsvd-model";

/// A numeric table read from CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    /// Rows × columns, in file order.
    pub data: Mat,
}

/// Parses a comma-separated table with a header row. Data rows are numbered
/// from 1 (the header is not counted) in parse errors.
pub fn read_csv<R: Read>(reader: R) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_error(e, 0))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(SpcrError::Parse {
            row: 0,
            column: String::new(),
            message: "missing header row".into(),
        });
    }
    let mut values = Vec::new();
    let mut rows = 0;
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| csv_error(e, row))?;
        if record.len() != headers.len() {
            return Err(SpcrError::Parse {
                row,
                column: String::new(),
                message: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| SpcrError::Parse {
                row,
                column: headers[j].clone(),
                message: format!("{field:?} is not a number"),
            })?;
            if !v.is_finite() {
                return Err(SpcrError::Parse {
                    row,
                    column: headers[j].clone(),
                    message: format!("{field:?} is not finite"),
                });
            }
            values.push(v);
        }
        rows += 1;
    }
    Ok(Table {
        data: Mat::from_row_slice(rows, headers.len(), &values),
        headers,
    })
}

fn csv_error(e: csv::Error, row: usize) -> SpcrError {
    match e.kind() {
        csv::ErrorKind::Io(_) => SpcrError::Io(e.to_string()),
        _ => SpcrError::Parse {
            row,
            column: String::new(),
            message: e.to_string(),
        },
    }
}

pub fn read_csv_path(path: &Path) -> Result<Table> {
    let file = std::fs::File::open(path).map_err(|e| SpcrError::Io(format!("{}: {e}", path.display())))?;
    read_csv(std::io::BufReader::new(file))
}

/// Covariates and response split out of a [`Table`].
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub x: Mat,
    pub y: Vector,
    pub covariates: Vec<String>,
    pub target: String,
}

fn column_index(table: &Table, name: &str) -> Result<usize> {
    table
        .headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| SpcrError::InvalidConfig(format!("no column named {name:?}")))
}

/// Uses `target` as the response and every other column not in `drop` as a
/// covariate, in file order.
pub fn split_target(table: &Table, target: &str, drop: &[String]) -> Result<Design> {
    let t = column_index(table, target)?;
    for d in drop {
        column_index(table, d)?;
    }
    let covariates: Vec<String> = table
        .headers
        .iter()
        .filter(|h| *h != target && !drop.contains(h))
        .cloned()
        .collect();
    if covariates.is_empty() {
        return Err(SpcrError::InvalidConfig("no covariate columns left".into()));
    }
    let x = select_columns(table, &covariates)?;
    Ok(Design {
        x,
        y: table.data.column(t).into_owned(),
        covariates,
        target: target.to_string(),
    })
}

/// Columns of `table` named by `names`, in that order.
pub fn select_columns(table: &Table, names: &[String]) -> Result<Mat> {
    let idx: Vec<usize> = names.iter().map(|n| column_index(table, n)).collect::<Result<_>>()?;
    Ok(Mat::from_fn(table.data.nrows(), idx.len(), |i, j| table.data[(i, idx[j])]))
}

/// A model together with the column names it was trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub model: SpcrsvdModel,
    pub target: String,
    pub covariates: Vec<String>,
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn put_matrix(out: &mut String, name: &str, m: &Mat) {
    let _ = writeln!(out, "matrix {name} {} {}", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| fmt_f64(m[(i, j)])).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
}

fn column(v: &Vector) -> Mat {
    Mat::from_column_slice(v.len(), 1, v.as_slice())
}

pub fn model_to_string(file: &ModelFile) -> String {
    let m = &file.model;
    let c = &m.config;
    let r = &m.diagnostics.final_residuals;
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC} {MODEL_FORMAT_VERSION}");
    let _ = writeln!(out, "target {}", file.target);
    let _ = writeln!(out, "covariates {}", file.covariates.len());
    for name in &file.covariates {
        let _ = writeln!(out, "{name}");
    }
    let _ = writeln!(out, "algorithm {}", m.algorithm.as_str());
    let _ = writeln!(out, "intercept {}", fmt_f64(m.intercept));
    let _ = writeln!(out, "standardized {}", m.transform.standardized);
    for (key, v) in [
        ("w", c.w),
        ("lambda_v", c.lambda_v),
        ("lambda_beta", c.lambda_beta),
        ("rho1", c.rho1),
        ("rho2", c.rho2),
        ("rho3", c.rho3),
        ("tol_abs", c.tol_abs),
        ("tol_rel", c.tol_rel),
        ("primal_loadings", r.primal_loadings),
        ("primal_coefficients", r.primal_coefficients),
        ("dual_loadings", r.dual_loadings),
        ("dual_coefficients", r.dual_coefficients),
        ("eps_pri_loadings", r.eps_pri_loadings),
        ("eps_pri_coefficients", r.eps_pri_coefficients),
        ("eps_dual_loadings", r.eps_dual_loadings),
        ("eps_dual_coefficients", r.eps_dual_coefficients),
    ] {
        let _ = writeln!(out, "{key} {}", fmt_f64(v));
    }
    let _ = writeln!(out, "k {}", c.k);
    let _ = writeln!(out, "max_iter {}", c.max_iter);
    let _ = writeln!(out, "seed {}", c.seed);
    let _ = writeln!(out, "iterations {}", m.diagnostics.iterations);
    let _ = writeln!(out, "converged {}", m.diagnostics.converged);
    let _ = writeln!(out, "degenerate_iterates {}", m.diagnostics.degenerate_iterates);
    put_matrix(&mut out, "beta", &column(&m.beta));
    put_matrix(&mut out, "beta_sparse", &column(&m.beta_sparse));
    put_matrix(&mut out, "loadings", &m.loadings);
    put_matrix(&mut out, "sparse_loadings", &m.sparse_loadings);
    put_matrix(&mut out, "regression_loadings", &m.regression_loadings);
    put_matrix(&mut out, "scores", &m.scores);
    put_matrix(&mut out, "composite_coefficients", &column(&m.composite_coefficients));
    put_matrix(&mut out, "means", &column(&m.transform.means));
    put_matrix(&mut out, "scales", &column(&m.transform.scales));
    out.push_str("end\n");
    out
}

pub fn write_model<W: Write>(file: &ModelFile, mut w: W) -> Result<()> {
    w.write_all(model_to_string(file).as_bytes())?;
    Ok(())
}

pub fn save_model(file: &ModelFile, path: &Path) -> Result<()> {
    std::fs::write(path, model_to_string(file)).map_err(|e| SpcrError::Io(format!("{}: {e}", path.display())))
}

pub fn load_model(path: &Path) -> Result<ModelFile> {
    let file = std::fs::File::open(path).map_err(|e| SpcrError::Io(format!("{}: {e}", path.display())))?;
    read_model(std::io::BufReader::new(file))
}

fn bad(msg: impl Into<String>) -> SpcrError {
    SpcrError::ModelFormat(msg.into())
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| bad(format!("bad value {v:?} for {key}")))
}

pub fn read_model<R: BufRead>(reader: R) -> Result<ModelFile> {
    let lines: Vec<String> = reader.lines().collect::<std::io::Result<_>>()?;
    let mut it = lines.iter();
    let header = it.next().ok_or_else(|| bad("empty file"))?;
    match header.split_once(' ') {
        Some((MAGIC, v)) if v.trim() == MODEL_FORMAT_VERSION.to_string() => {}
        Some((MAGIC, v)) => return Err(bad(format!("unsupported format version {v}"))),
        _ => return Err(bad("missing header")),
    }

    let mut scalars: HashMap<String, String> = HashMap::new();
    let mut matrices: HashMap<String, Mat> = HashMap::new();
    let mut covariates = Vec::new();
    let mut ended = false;
    while let Some(line) = it.next() {
        if line == "end" {
            ended = true;
            break;
        }
        let (key, value) = line.split_once(' ').unwrap_or((line.as_str(), ""));
        match key {
            "covariates" => {
                let count: usize = parse_num(key, value)?;
                for _ in 0..count {
                    covariates.push(it.next().ok_or_else(|| bad("truncated covariate list"))?.clone());
                }
            }
            "matrix" => {
                let parts: Vec<&str> = value.split(' ').collect();
                if parts.len() != 3 {
                    return Err(bad(format!("bad matrix header {line:?}")));
                }
                let (rows, cols): (usize, usize) = (parse_num("rows", parts[1])?, parse_num("cols", parts[2])?);
                let mut data = Vec::with_capacity(rows * cols);
                for _ in 0..rows {
                    let row = it.next().ok_or_else(|| bad(format!("truncated matrix {}", parts[0])))?;
                    let vals: Vec<f64> = row
                        .split(' ')
                        .filter(|s| !s.is_empty())
                        .map(|s| parse_num(parts[0], s))
                        .collect::<Result<_>>()?;
                    if vals.len() != cols {
                        return Err(bad(format!("matrix {} row has {} entries, expected {cols}", parts[0], vals.len())));
                    }
                    data.extend(vals);
                }
                matrices.insert(parts[0].to_string(), Mat::from_row_slice(rows, cols, &data));
            }
            _ => {
                scalars.insert(key.to_string(), value.to_string());
            }
        }
    }
    if !ended {
        return Err(bad("missing end marker"));
    }

    let s = |key: &str| scalars.get(key).map(String::as_str).ok_or_else(|| bad(format!("missing {key}")));
    let f = |key: &str| -> Result<f64> { parse_num(key, s(key)?) };
    let u = |key: &str| -> Result<usize> { parse_num(key, s(key)?) };
    let b = |key: &str| -> Result<bool> { parse_num(key, s(key)?) };
    let mut take = |key: &str| matrices.remove(key).ok_or_else(|| bad(format!("missing matrix {key}")));
    let vec_of = |m: Mat| Vector::from_column_slice(m.as_slice());

    let algorithm: Algorithm = s("algorithm")?.parse().map_err(|_| bad("unknown algorithm"))?;
    let config = FitConfig {
        k: u("k")?,
        w: f("w")?,
        lambda_v: f("lambda_v")?,
        lambda_beta: f("lambda_beta")?,
        rho1: f("rho1")?,
        rho2: f("rho2")?,
        rho3: f("rho3")?,
        max_iter: u("max_iter")?,
        tol_abs: f("tol_abs")?,
        tol_rel: f("tol_rel")?,
        algorithm,
        seed: parse_num("seed", s("seed")?)?,
    };
    let final_residuals = Residuals {
        primal_loadings: f("primal_loadings")?,
        primal_coefficients: f("primal_coefficients")?,
        dual_loadings: f("dual_loadings")?,
        dual_coefficients: f("dual_coefficients")?,
        eps_pri_loadings: f("eps_pri_loadings")?,
        eps_pri_coefficients: f("eps_pri_coefficients")?,
        eps_dual_loadings: f("eps_dual_loadings")?,
        eps_dual_coefficients: f("eps_dual_coefficients")?,
    };
    let model = SpcrsvdModel {
        algorithm,
        intercept: f("intercept")?,
        beta: vec_of(take("beta")?),
        beta_sparse: vec_of(take("beta_sparse")?),
        loadings: take("loadings")?,
        sparse_loadings: take("sparse_loadings")?,
        regression_loadings: take("regression_loadings")?,
        scores: take("scores")?,
        composite_coefficients: vec_of(take("composite_coefficients")?),
        transform: Transform {
            means: vec_of(take("means")?),
            scales: vec_of(take("scales")?),
            standardized: b("standardized")?,
        },
        config,
        diagnostics: ConvergenceReport {
            iterations: u("iterations")?,
            converged: b("converged")?,
            degenerate_iterates: u("degenerate_iterates")?,
            final_residuals,
            ..ConvergenceReport::default()
        },
    };
    let (p, k) = (model.loadings.nrows(), model.loadings.ncols());
    let consistent = model.beta.len() == k
        && model.beta_sparse.len() == k
        && model.sparse_loadings.shape() == (p, k)
        && model.regression_loadings.shape() == (p, k)
        && model.scores.ncols() == k
        && model.composite_coefficients.len() == p
        && model.transform.p() == p
        && model.transform.scales.len() == p
        && covariates.len() == p;
    if !consistent {
        return Err(bad("inconsistent matrix dimensions"));
    }
    Ok(ModelFile {
        model,
        target: s("target")?.to_string(),
        covariates,
    })
}
