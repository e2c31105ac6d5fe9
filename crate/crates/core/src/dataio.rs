//! CSV ingestion and design-matrix construction.

use std::collections::{HashMap, HashSet};
use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

/// A named, column-oriented numeric table.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    n: usize,
}

impl Dataset {
    /// Builds a dataset from `(name, values)` pairs.
    pub fn from_columns(cols: Vec<(String, Vec<f64>)>) -> Result<Self> {
        const OP: &str = "dataset";
        if cols.is_empty() {
            return Err(Error::invalid(OP, "no columns"));
        }
        let n = cols[0].1.len();
        if n == 0 {
            return Err(Error::invalid(OP, "no rows"));
        }
        let mut seen = HashSet::new();
        let mut names = Vec::with_capacity(cols.len());
        let mut columns = Vec::with_capacity(cols.len());
        for (name, values) in cols {
            if name.is_empty() {
                return Err(Error::invalid(OP, "empty column name"));
            }
            if !seen.insert(name.clone()) {
                return Err(Error::invalid(OP, format!("duplicate column name '{name}'")));
            }
            if values.len() != n {
                return Err(Error::invalid(
                    OP,
                    format!("column '{name}' has {} values, expected {n}", values.len()),
                ));
            }
            if let Some(i) = values.iter().position(|v| !v.is_finite()) {
                return Err(Error::invalid(OP, format!("non-finite value in column '{name}', row {}", i + 1)));
            }
            names.push(name);
            columns.push(values);
        }
        Ok(Dataset { names, columns, n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.index_of(name).map(|i| self.columns[i].as_slice())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|c| c == name)
    }

    /// The named column as a vector, or an error naming the missing column.
    pub fn vector(&self, name: &str) -> Result<DVector<f64>> {
        self.column(name)
            .map(DVector::from_column_slice)
            .ok_or_else(|| Error::invalid("dataset", format!("unknown column '{name}'")))
    }

    /// Named columns stacked into an `n × k` matrix.
    pub fn matrix(&self, names: &[String]) -> Result<DMatrix<f64>> {
        let mut m = DMatrix::zeros(self.n, names.len());
        for (j, name) in names.iter().enumerate() {
            let col = self
                .column(name)
                .ok_or_else(|| Error::invalid("dataset", format!("unknown column '{name}'")))?;
            m.column_mut(j).copy_from_slice(col);
        }
        Ok(m)
    }
}

/// What to do with rows that contain empty or unparsable cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NaPolicy {
    #[default]
    Reject,
    DropRows,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LoadReport {
    pub dropped_rows: usize,
}

/// Reads a comma-separated file with a header row.
pub fn load_csv(path: impl AsRef<Path>, na_policy: NaPolicy) -> Result<(Dataset, LoadReport)> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        op: "load_csv",
        path: path.display().to_string(),
        source,
    })?;
    read_csv(file, na_policy)
}

/// [`load_csv`] over any reader.
pub fn read_csv<R: Read>(reader: R, na_policy: NaPolicy) -> Result<(Dataset, LoadReport)> {
    const OP: &str = "load_csv";
    let csv_err = |e: csv::Error| Error::Csv { op: OP, msg: e.to_string() };
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(Error::Csv { op: OP, msg: "missing header row".into() });
    }
    let mut seen = HashSet::new();
    for name in &header {
        if name.is_empty() {
            return Err(Error::Csv { op: OP, msg: "empty header name".into() });
        }
        if !seen.insert(name.as_str()) {
            return Err(Error::Csv { op: OP, msg: format!("duplicate header name '{name}'") });
        }
    }

    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); header.len()];
    let mut report = LoadReport::default();
    let mut row_buf = vec![0.0; header.len()];
    for (r, record) in rdr.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let row = r + 1;
        if record.len() != header.len() {
            return Err(Error::Csv {
                op: OP,
                msg: format!("row {row} has {} fields, header has {}", record.len(), header.len()),
            });
        }
        let mut missing = None;
        for (j, cell) in record.iter().enumerate() {
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => row_buf[j] = v,
                _ => {
                    missing = Some(j);
                    break;
                }
            }
        }
        match (missing, na_policy) {
            (None, _) => {
                for (col, &v) in columns.iter_mut().zip(&row_buf) {
                    col.push(v);
                }
            }
            (Some(j), NaPolicy::Reject) => {
                return Err(Error::Csv {
                    op: OP,
                    msg: format!("missing or non-numeric value at row {row}, column '{}'", header[j]),
                });
            }
            (Some(_), NaPolicy::DropRows) => report.dropped_rows += 1,
        }
    }
    if report.dropped_rows > 0 {
        log::warn!("load_csv: dropped {} row(s) with missing values", report.dropped_rows);
    }
    if columns[0].is_empty() {
        return Err(Error::Csv { op: OP, msg: "no complete data rows".into() });
    }
    let ds = Dataset::from_columns(header.into_iter().zip(columns).collect())?;
    Ok((ds, report))
}

/// Writes columns as CSV readable by [`load_csv`].
pub fn write_csv(path: impl AsRef<Path>, names: &[String], columns: &[&[f64]]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|source| Error::Io {
        op: "write_csv",
        path: path.display().to_string(),
        source,
    })?;
    write_csv_to(file, names, columns)
}

pub fn write_csv_to<W: std::io::Write>(writer: W, names: &[String], columns: &[&[f64]]) -> Result<()> {
    const OP: &str = "write_csv";
    let csv_err = |e: csv::Error| Error::Csv { op: OP, msg: e.to_string() };
    if names.len() != columns.len() {
        return Err(Error::invalid(OP, "names and columns differ in length"));
    }
    let n = columns.first().map_or(0, |c| c.len());
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(names).map_err(csv_err)?;
    let mut row = Vec::with_capacity(names.len());
    for i in 0..n {
        row.clear();
        // `{:?}` on f64 gives the shortest representation that round-trips
        row.extend(columns.iter().map(|c| format!("{:?}", c[i])));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|source| Error::Io { op: OP, path: String::new(), source })?;
    Ok(())
}

/// Role of a design column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Target,
    Control,
    Instrument,
}

/// Which dataset columns enter a model and how.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DesignSpec {
    pub outcome: String,
    pub targets: Vec<String>,
    pub controls: Vec<String>,
    pub instruments: Vec<String>,
    /// Product columns to generate; components may name earlier products.
    pub interactions: Vec<(String, String)>,
    pub include_intercept: bool,
}

/// All unordered pairs of `names`, in lexicographic index order.
pub fn pairwise(names: &[String]) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for i in 0..names.len() {
        for j in i + 1..names.len() {
            out.push((names[i].clone(), names[j].clone()));
        }
    }
    out
}

/// `base` crossed with each entry of `others`.
pub fn crossed(base: &str, others: &[String]) -> Vec<(String, String)> {
    others.iter().map(|o| (base.to_string(), o.clone())).collect()
}

/// Numeric design with named, role-tagged columns.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub x: DMatrix<f64>,
    pub column_names: Vec<String>,
    pub roles: Vec<Role>,
    /// Columns dropped as constant.
    pub removed: Vec<String>,
}

impl DesignMatrix {
    pub fn new(x: DMatrix<f64>, column_names: Vec<String>, roles: Vec<Role>) -> Result<Self> {
        if column_names.len() != x.ncols() || roles.len() != x.ncols() {
            return Err(Error::invalid("design", "names/roles do not match column count"));
        }
        let unique: HashSet<&String> = column_names.iter().collect();
        if unique.len() != column_names.len() {
            return Err(Error::invalid("design", "duplicate column names"));
        }
        Ok(DesignMatrix { x, column_names, roles, removed: Vec::new() })
    }

    /// Unnamed design with columns `V1, V2, …` and a single role.
    pub fn unnamed(x: DMatrix<f64>, role: Role) -> Self {
        let p = x.ncols();
        DesignMatrix {
            x,
            column_names: (1..=p).map(|j| format!("V{j}")).collect(),
            roles: vec![role; p],
            removed: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn indices_with_role(&self, role: Role) -> Vec<usize> {
        (0..self.p()).filter(|&j| self.roles[j] == role).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }

    /// Sub-design made of the listed columns.
    pub fn select(&self, idx: &[usize]) -> DesignMatrix {
        DesignMatrix {
            x: crate::linalg::select_columns(&self.x, idx),
            column_names: idx.iter().map(|&j| self.column_names[j].clone()).collect(),
            roles: idx.iter().map(|&j| self.roles[j]).collect(),
            removed: Vec::new(),
        }
    }
}

fn is_constant(values: &[f64]) -> bool {
    values.iter().all(|&v| v == values[0])
}

/// Builds the design for `spec` from `ds`.
///
/// Column order is targets, controls, instruments (dataset columns only),
/// followed by generated interactions in list order. A generated column
/// takes the target or instrument role only when its name is listed there.
/// Constant columns are dropped afterwards and recorded in `removed`.
pub fn expand_design(ds: &Dataset, spec: &DesignSpec) -> Result<DesignMatrix> {
    const OP: &str = "expand_design";
    let listed: Vec<&String> = spec.targets.iter().chain(&spec.controls).chain(&spec.instruments).collect();
    {
        let mut seen = HashSet::new();
        for name in &listed {
            if **name == spec.outcome {
                return Err(Error::invalid(OP, format!("outcome '{name}' also used as a regressor")));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::invalid(OP, format!("'{name}' listed under more than one role")));
            }
        }
    }
    if ds.index_of(&spec.outcome).is_none() {
        return Err(Error::invalid(OP, format!("unknown outcome column '{}'", spec.outcome)));
    }

    // spec order used to orient interaction names
    let mut rank: HashMap<String, usize> = HashMap::new();
    for (i, name) in listed.iter().enumerate() {
        rank.insert((*name).clone(), i);
    }
    for (i, name) in ds.names().iter().enumerate() {
        rank.entry(name.clone()).or_insert(listed.len() + i);
    }

    let mut generated: Vec<(String, Vec<f64>)> = Vec::new();
    let mut generated_names: HashSet<String> = HashSet::new();
    let lookup = |name: &str, generated: &[(String, Vec<f64>)]| -> Option<Vec<f64>> {
        ds.column(name)
            .map(<[f64]>::to_vec)
            .or_else(|| generated.iter().find(|(g, _)| g == name).map(|(_, v)| v.clone()))
    };
    for (a, b) in &spec.interactions {
        if a == b {
            return Err(Error::invalid(OP, format!("self-interaction '{a}:{a}'")));
        }
        let va = lookup(a, &generated).ok_or_else(|| Error::invalid(OP, format!("unknown column '{a}' in interaction")))?;
        let vb = lookup(b, &generated).ok_or_else(|| Error::invalid(OP, format!("unknown column '{b}' in interaction")))?;
        let (first, second) = if rank[b] < rank[a] { (b, a) } else { (a, b) };
        let name = format!("{first}:{second}");
        if ds.index_of(&name).is_some() {
            return Err(Error::invalid(OP, format!("interaction name '{name}' clashes with a dataset column")));
        }
        if !generated_names.insert(name.clone()) {
            log::debug!("{OP}: duplicate interaction '{name}' ignored");
            continue;
        }
        let next = rank.len();
        rank.insert(name.clone(), next);
        let prod = va.iter().zip(&vb).map(|(x, y)| x * y).collect();
        generated.push((name, prod));
    }

    let role_of = |name: &str| {
        if spec.targets.iter().any(|t| t == name) {
            Role::Target
        } else if spec.instruments.iter().any(|z| z == name) {
            Role::Instrument
        } else {
            Role::Control
        }
    };

    let mut names = Vec::new();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for name in &listed {
        if let Some(col) = ds.column(name) {
            names.push((*name).clone());
            cols.push(col.to_vec());
        } else if !generated_names.contains(*name) {
            return Err(Error::invalid(OP, format!("unknown column '{name}'")));
        }
    }
    for (name, col) in generated {
        names.push(name);
        cols.push(col);
    }

    let mut removed = Vec::new();
    let mut keep_names = Vec::new();
    let mut keep_cols = Vec::new();
    for (name, col) in names.into_iter().zip(cols) {
        if is_constant(&col) {
            removed.push(name);
        } else {
            keep_names.push(name);
            keep_cols.push(col);
        }
    }
    if !removed.is_empty() {
        log::warn!("{OP}: removed {} constant column(s): {}", removed.len(), removed.join(", "));
    }
    if keep_names.is_empty() {
        return Err(Error::invalid(OP, "every column is constant; design is empty"));
    }
    let n = ds.n();
    let mut x = DMatrix::zeros(n, keep_cols.len());
    for (j, col) in keep_cols.iter().enumerate() {
        x.column_mut(j).copy_from_slice(col);
    }
    let roles = keep_names.iter().map(|nm| role_of(nm)).collect();
    Ok(DesignMatrix { x, column_names: keep_names, roles, removed })
}

/// Names among `names` whose column mean exceeds `threshold`.
pub fn filter_by_column_mean(ds: &Dataset, names: &[String], threshold: f64) -> Result<Vec<String>> {
    let mut keep = Vec::new();
    for name in names {
        let col = ds
            .column(name)
            .ok_or_else(|| Error::invalid("filter_by_column_mean", format!("unknown column '{name}'")))?;
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        if mean > threshold {
            keep.push(name.clone());
        }
    }
    Ok(keep)
}

/// Expands a comma-separated column list against the available names.
///
/// Items may be plain names, numeric ranges `x1..x100` (same prefix on both
/// ends) or prefix wildcards `x_*` matching available columns in order.
pub fn parse_column_list(list: &str, available: &[String]) -> Result<Vec<String>> {
    const OP: &str = "column list";
    let mut out = Vec::new();
    for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if let Some((lo, hi)) = item.split_once("..") {
            let (p1, a) = split_numeric_suffix(lo).ok_or_else(|| Error::invalid(OP, format!("bad range start '{lo}'")))?;
            let (p2, b) = split_numeric_suffix(hi).ok_or_else(|| Error::invalid(OP, format!("bad range end '{hi}'")))?;
            if p1 != p2 {
                return Err(Error::invalid(OP, format!("range '{item}' mixes prefixes")));
            }
            if a > b {
                return Err(Error::invalid(OP, format!("range '{item}' is decreasing")));
            }
            for name in (a..=b).map(|k| format!("{p1}{k}")) {
                out.push(known(name, available)?);
            }
        } else if let Some(prefix) = item.strip_suffix('*') {
            let matched: Vec<String> = available.iter().filter(|c| c.starts_with(prefix)).cloned().collect();
            if matched.is_empty() {
                return Err(Error::invalid(OP, format!("pattern '{item}' matches no column")));
            }
            out.extend(matched);
        } else if item.contains(':') {
            // generated interaction, resolved by expand_design
            out.push(item.to_string());
        } else {
            out.push(known(item.to_string(), available)?);
        }
    }
    Ok(out)
}

fn known(name: String, available: &[String]) -> Result<String> {
    if available.contains(&name) {
        Ok(name)
    } else {
        Err(Error::invalid("column list", format!("unknown column '{name}'")))
    }
}

fn split_numeric_suffix(s: &str) -> Option<(&str, u64)> {
    let digits = s.bytes().rev().take_while(u8::is_ascii_digit).count();
    if digits == 0 {
        return None;
    }
    let (prefix, num) = s.split_at(s.len() - digits);
    num.parse().ok().map(|k| (prefix, k))
}
