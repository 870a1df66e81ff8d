//! Expression and clinical tables, and their alignment into per-cohort
//! datasets.
//!
//! Files are delimiter-separated text. The delimiter is a tab if the header
//! line contains one, a comma otherwise.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest cohort `build_cohort` will return.
pub const MIN_COHORT_SIZE: usize = 3;

/// Samples × genes matrix of expression values.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionMatrix {
    sample_ids: Vec<String>,
    gene_ids: Vec<String>,
    values: Array2<f64>,
}

impl ExpressionMatrix {
    pub fn new(sample_ids: Vec<String>, gene_ids: Vec<String>, values: Array2<f64>) -> Result<Self> {
        if values.nrows() != sample_ids.len() || values.ncols() != gene_ids.len() {
            return Err(Error::invalid(format!(
                "matrix is {}x{} but there are {} sample ids and {} gene ids",
                values.nrows(),
                values.ncols(),
                sample_ids.len(),
                gene_ids.len()
            )));
        }
        check_unique(&sample_ids, "sample")?;
        check_unique(&gene_ids, "gene")?;
        if let Some(((r, c), _)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "missing value at sample \"{}\", gene \"{}\"",
                sample_ids[r], gene_ids[c]
            )));
        }
        Ok(ExpressionMatrix {
            sample_ids,
            gene_ids,
            values,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn n_genes(&self) -> usize {
        self.gene_ids.len()
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn gene_ids(&self) -> &[String] {
        &self.gene_ids
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn column(&self, j: usize) -> ArrayView1<'_, f64> {
        self.values.column(j)
    }

    pub fn gene_index(&self, gene: &str) -> Option<usize> {
        self.gene_ids.iter().position(|g| g == gene)
    }

    /// Same samples, new values. Used by column-wise transforms.
    pub(crate) fn with_values(&self, values: Array2<f64>) -> Self {
        debug_assert_eq!(values.dim(), self.values.dim());
        ExpressionMatrix {
            sample_ids: self.sample_ids.clone(),
            gene_ids: self.gene_ids.clone(),
            values,
        }
    }

    /// Columns by position, in the order given.
    pub fn select_columns(&self, columns: &[usize]) -> Self {
        let values = self.values.select(ndarray::Axis(1), columns);
        ExpressionMatrix {
            sample_ids: self.sample_ids.clone(),
            gene_ids: columns.iter().map(|&j| self.gene_ids[j].clone()).collect(),
            values,
        }
    }

    /// Columns by gene id, in the order given.
    pub fn select_genes<S: AsRef<str>>(&self, genes: &[S]) -> Result<Self> {
        let index: HashMap<&str, usize> = self
            .gene_ids
            .iter()
            .enumerate()
            .map(|(j, g)| (g.as_str(), j))
            .collect();
        let columns = genes
            .iter()
            .map(|g| {
                index
                    .get(g.as_ref())
                    .copied()
                    .ok_or_else(|| Error::UnknownGene(g.as_ref().to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.select_columns(&columns))
    }

    /// Rows by position, in the order given.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        ExpressionMatrix {
            sample_ids: rows.iter().map(|&i| self.sample_ids[i].clone()).collect(),
            gene_ids: self.gene_ids.clone(),
            values: self.values.select(ndarray::Axis(0), rows),
        }
    }

    pub fn transposed(&self) -> Self {
        ExpressionMatrix {
            sample_ids: self.gene_ids.clone(),
            gene_ids: self.sample_ids.clone(),
            values: self.values.t().to_owned(),
        }
    }
}

fn check_unique(ids: &[String], kind: &'static str) -> Result<()> {
    let mut seen = HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::DuplicateId {
                kind,
                id: id.clone(),
            });
        }
    }
    Ok(())
}

/// Layout of an expression file on disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Header row of gene ids, one row per sample.
    #[default]
    SamplesByGenes,
    /// Header row of sample ids, one row per gene.
    GenesBySamples,
}

impl FromStr for Orientation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "samples_by_genes" => Ok(Orientation::SamplesByGenes),
            "genes_by_samples" => Ok(Orientation::GenesBySamples),
            other => Err(Error::invalid(format!("unknown orientation \"{other}\""))),
        }
    }
}

fn detect_delimiter(path: &Path) -> Result<u8> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut header = String::new();
    BufReader::new(file)
        .read_line(&mut header)
        .map_err(|e| Error::io(path, e))?;
    Ok(if header.contains('\t') { b'\t' } else { b',' })
}

fn read_records(path: &Path) -> Result<Vec<csv::StringRecord>> {
    let delimiter = detect_delimiter(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        // skip blank lines
        if record.len() == 1 && record[0].trim().is_empty() {
            continue;
        }
        rows.push(record);
    }
    Ok(rows)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: path.to_path_buf(),
            line,
            column: 0,
            message: format!("{other:?}"),
        },
    }
}

fn is_missing(cell: &str) -> bool {
    matches!(cell, "" | "NA" | "na" | "NaN" | "nan" | "null")
}

/// Reads an expression table and returns it in samples × genes orientation.
pub fn load_expression(path: impl AsRef<Path>, orientation: Orientation) -> Result<ExpressionMatrix> {
    let path = path.as_ref();
    let rows = read_records(path)?;
    let Some((header, body)) = rows.split_first() else {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            column: 0,
            message: "empty file".into(),
        });
    };
    let col_ids: Vec<String> = header.iter().skip(1).map(|s| s.trim().to_string()).collect();
    let (col_kind, row_kind) = match orientation {
        Orientation::SamplesByGenes => ("gene", "sample"),
        Orientation::GenesBySamples => ("sample", "gene"),
    };
    check_unique(&col_ids, col_kind)?;

    let width = col_ids.len();
    let mut row_ids = Vec::with_capacity(body.len());
    let mut values = Vec::with_capacity(body.len() * width);
    for (r, record) in body.iter().enumerate() {
        let line = r + 2;
        let id = record.get(0).unwrap_or("").trim().to_string();
        if id.is_empty() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                column: 1,
                message: format!("missing {row_kind} identifier"),
            });
        }
        for c in 0..width {
            let cell = record.get(c + 1).map(str::trim).unwrap_or("");
            if is_missing(cell) {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    column: c + 2,
                    message: format!("missing value ({row_kind} \"{id}\", {col_kind} \"{}\")", col_ids[c]),
                });
            }
            let v: f64 = cell
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    column: c + 2,
                    message: format!("non-numeric value \"{cell}\""),
                })?;
            values.push(v);
        }
        if record.len() > width + 1 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                column: width + 2,
                message: "more cells than header columns".into(),
            });
        }
        row_ids.push(id);
    }
    check_unique(&row_ids, row_kind)?;

    let values = Array2::from_shape_vec((row_ids.len(), width), values)
        .expect("cell count checked per row");
    let matrix = ExpressionMatrix {
        sample_ids: row_ids,
        gene_ids: col_ids,
        values,
    };
    Ok(match orientation {
        Orientation::SamplesByGenes => matrix,
        Orientation::GenesBySamples => {
            // Ids were filled in file order; swap roles.
            let ExpressionMatrix {
                sample_ids: genes,
                gene_ids: samples,
                values,
            } = matrix;
            ExpressionMatrix {
                sample_ids: samples,
                gene_ids: genes,
                values: values.t().to_owned(),
            }
        }
    })
}

/// Writes the matrix tab-separated, samples × genes.
pub fn write_expression(path: impl AsRef<Path>, expr: &ExpressionMatrix) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        write!(w, "sample_id")?;
        for g in &expr.gene_ids {
            write!(w, "\t{g}")?;
        }
        writeln!(w)?;
        for (i, s) in expr.sample_ids.iter().enumerate() {
            write!(w, "{s}")?;
            for v in expr.values.row(i) {
                write!(w, "\t{v}")?;
            }
            writeln!(w)?;
        }
        w.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

/// Classification scheme under which samples were labeled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "who2016")]
    Who2016,
    #[serde(rename = "who2021")]
    Who2021,
}

impl Scheme {
    pub const ALL: [Scheme; 2] = [Scheme::Who2016, Scheme::Who2021];
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Who2016 => "who2016",
            Scheme::Who2021 => "who2021",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "who2016" | "2016" => Ok(Scheme::Who2016),
            "who2021" | "2021" => Ok(Scheme::Who2021),
            other => Err(Error::invalid(format!("unknown scheme \"{other}\""))),
        }
    }
}

/// Per-sample label as recorded in the clinical table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum GliomaLabel {
    Astro,
    Oligo,
    Gbm,
    #[default]
    Unknown,
}

impl GliomaLabel {
    fn parse(cell: &str) -> Option<Self> {
        match cell.trim().to_ascii_lowercase().as_str() {
            "astro" | "astrocytoma" => Some(GliomaLabel::Astro),
            "oligo" | "oligodendroglioma" => Some(GliomaLabel::Oligo),
            "gbm" | "glioblastoma" => Some(GliomaLabel::Gbm),
            "" | "unknown" | "na" => Some(GliomaLabel::Unknown),
            _ => None,
        }
    }

    pub fn as_type(self) -> Option<GliomaType> {
        match self {
            GliomaLabel::Astro => Some(GliomaType::Astro),
            GliomaLabel::Oligo => Some(GliomaType::Oligo),
            GliomaLabel::Gbm => Some(GliomaType::Gbm),
            GliomaLabel::Unknown => None,
        }
    }
}

impl fmt::Display for GliomaLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GliomaLabel::Astro => "Astro",
            GliomaLabel::Oligo => "Oligo",
            GliomaLabel::Gbm => "GBM",
            GliomaLabel::Unknown => "Unknown",
        })
    }
}

/// Which samples a cohort holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GliomaType {
    Astro,
    Oligo,
    Gbm,
    /// Every labeled sample of the scheme.
    PanGlioma,
}

impl GliomaType {
    pub const TYPES: [GliomaType; 3] = [GliomaType::Astro, GliomaType::Oligo, GliomaType::Gbm];

    fn accepts(self, label: GliomaLabel) -> bool {
        match self {
            GliomaType::PanGlioma => label != GliomaLabel::Unknown,
            t => label.as_type() == Some(t),
        }
    }
}

impl fmt::Display for GliomaType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GliomaType::Astro => "astro",
            GliomaType::Oligo => "oligo",
            GliomaType::Gbm => "gbm",
            GliomaType::PanGlioma => "pan_glioma",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClinicalRecord {
    pub sample_id: String,
    /// Follow-up time in days.
    pub time: f64,
    /// `true` when death was observed, `false` when censored.
    pub event: bool,
    pub label_2016: GliomaLabel,
    pub label_2021: GliomaLabel,
}

impl ClinicalRecord {
    pub fn label(&self, scheme: Scheme) -> GliomaLabel {
        match scheme {
            Scheme::Who2016 => self.label_2016,
            Scheme::Who2021 => self.label_2021,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClinicalTable {
    records: Vec<ClinicalRecord>,
}

impl ClinicalTable {
    pub fn new(records: Vec<ClinicalRecord>) -> Result<Self> {
        let mut seen = HashSet::new();
        for r in &records {
            if !(r.time >= 0.0) || !r.time.is_finite() {
                return Err(Error::invalid(format!(
                    "negative survival time for sample \"{}\"",
                    r.sample_id
                )));
            }
            if !seen.insert(r.sample_id.as_str()) {
                return Err(Error::DuplicateId {
                    kind: "sample",
                    id: r.sample_id.clone(),
                });
            }
        }
        Ok(ClinicalTable { records })
    }

    pub fn records(&self) -> &[ClinicalRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.time).collect()
    }

    pub fn events(&self) -> Vec<bool> {
        self.records.iter().map(|r| r.event).collect()
    }

    pub fn n_events(&self) -> usize {
        self.records.iter().filter(|r| r.event).count()
    }
}

/// Reads a clinical table with header `sample_id,time,event[,label_2016][,label_2021]`.
pub fn load_clinical(path: impl AsRef<Path>) -> Result<ClinicalTable> {
    let path = path.as_ref();
    let rows = read_records(path)?;
    let parse_err = |line: usize, column: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        column,
        message,
    };
    let Some((header, body)) = rows.split_first() else {
        return Err(parse_err(1, 0, "empty file".into()));
    };
    let find = |name: &str| header.iter().position(|h| h.trim() == name);
    let required = |name: &str| {
        find(name).ok_or_else(|| parse_err(1, 0, format!("missing required column \"{name}\"")))
    };
    let (c_id, c_time, c_event) = (required("sample_id")?, required("time")?, required("event")?);
    let (c_2016, c_2021) = (find("label_2016"), find("label_2021"));

    let mut records = Vec::with_capacity(body.len());
    let mut seen = HashSet::new();
    for (r, rec) in body.iter().enumerate() {
        let line = r + 2;
        let cell = |c: usize| rec.get(c).map(str::trim).unwrap_or("");
        let sample_id = cell(c_id).to_string();
        if sample_id.is_empty() {
            return Err(parse_err(line, c_id + 1, "missing sample identifier".into()));
        }
        let time: f64 = cell(c_time)
            .parse()
            .ok()
            .filter(|t: &f64| t.is_finite())
            .ok_or_else(|| parse_err(line, c_time + 1, format!("non-numeric time \"{}\"", cell(c_time))))?;
        if time < 0.0 {
            return Err(parse_err(line, c_time + 1, format!("negative survival time {time}")));
        }
        let event = match cell(c_event).parse::<f64>() {
            Ok(v) if v == 0.0 => false,
            Ok(v) if v == 1.0 => true,
            _ => {
                return Err(parse_err(
                    line,
                    c_event + 1,
                    format!("event must be 0 or 1, got \"{}\"", cell(c_event)),
                ))
            }
        };
        let label = |c: Option<usize>| -> Result<GliomaLabel> {
            match c {
                None => Ok(GliomaLabel::Unknown),
                Some(c) => GliomaLabel::parse(cell(c))
                    .ok_or_else(|| parse_err(line, c + 1, format!("unknown glioma label \"{}\"", cell(c)))),
            }
        };
        if !seen.insert(sample_id.clone()) {
            return Err(Error::DuplicateId {
                kind: "sample",
                id: sample_id,
            });
        }
        records.push(ClinicalRecord {
            sample_id,
            time,
            event,
            label_2016: label(c_2016)?,
            label_2021: label(c_2021)?,
        });
    }
    Ok(ClinicalTable { records })
}

pub fn write_clinical(path: impl AsRef<Path>, table: &ClinicalTable) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        writeln!(w, "sample_id,time,event,label_2016,label_2021")?;
        for r in &table.records {
            writeln!(
                w,
                "{},{},{},{},{}",
                r.sample_id,
                r.time,
                u8::from(r.event),
                r.label_2016,
                r.label_2021
            )?;
        }
        w.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

/// Expression and survival data for one cohort, rows aligned.
#[derive(Debug, Clone, PartialEq)]
pub struct CohortDataset {
    pub expression: ExpressionMatrix,
    pub clinical: ClinicalTable,
    pub scheme: Scheme,
    pub glioma_type: GliomaType,
}

impl CohortDataset {
    pub fn n_samples(&self) -> usize {
        self.clinical.len()
    }

    pub fn label(&self, scheme: Scheme) -> Vec<GliomaLabel> {
        self.clinical.records.iter().map(|r| r.label(scheme)).collect()
    }
}

/// Samples present in both tables whose label under `scheme` matches
/// `glioma_type`, in clinical-file order.
pub fn build_cohort(
    expr: &ExpressionMatrix,
    clin: &ClinicalTable,
    scheme: Scheme,
    glioma_type: GliomaType,
) -> Result<CohortDataset> {
    assemble(expr, clin, scheme, glioma_type, |r| glioma_type.accepts(r.label(scheme)))
}

/// Pan-glioma cohort that keeps unlabeled samples too.
pub fn build_unlabeled_cohort(
    expr: &ExpressionMatrix,
    clin: &ClinicalTable,
    scheme: Scheme,
) -> Result<CohortDataset> {
    assemble(expr, clin, scheme, GliomaType::PanGlioma, |_| true)
}

fn assemble(
    expr: &ExpressionMatrix,
    clin: &ClinicalTable,
    scheme: Scheme,
    glioma_type: GliomaType,
    keep: impl Fn(&ClinicalRecord) -> bool,
) -> Result<CohortDataset> {
    let row_of: HashMap<&str, usize> = expr
        .sample_ids
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    let mut rows = Vec::new();
    let mut records = Vec::new();
    let mut unknown = 0usize;
    for rec in &clin.records {
        let Some(&row) = row_of.get(rec.sample_id.as_str()) else {
            continue;
        };
        if keep(rec) {
            rows.push(row);
            records.push(rec.clone());
        } else if rec.label(scheme) == GliomaLabel::Unknown {
            unknown += 1;
        }
    }
    if unknown > 0 {
        log::info!("{scheme}/{glioma_type}: dropped {unknown} shared samples with unknown label");
    }
    if rows.len() < MIN_COHORT_SIZE {
        return Err(Error::CohortTooSmall {
            found: rows.len(),
            needed: MIN_COHORT_SIZE,
        });
    }
    Ok(CohortDataset {
        expression: expr.select_rows(&rows),
        clinical: ClinicalTable { records },
        scheme,
        glioma_type,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    const TABLE: &str = "id,g1,g2\ns1,1.0,2.0\ns2,3.5,-1\ns3,0,7e-1\n";

    #[test]
    fn loads_both_orientations() {
        let f = write_tmp(TABLE);
        let m = load_expression(f.path(), Orientation::SamplesByGenes).unwrap();
        assert_eq!((m.n_samples(), m.n_genes()), (3, 2));
        assert_eq!(m.values()[[2, 1]], 0.7);

        let t = load_expression(f.path(), Orientation::GenesBySamples).unwrap();
        assert_eq!((t.n_samples(), t.n_genes()), (2, 3));
        assert_eq!(t.sample_ids(), &["g1", "g2"]);
        assert_eq!(t.values()[[1, 2]], 0.7);
    }

    #[test]
    fn tab_delimiter_detected() {
        let f = write_tmp("id\ta\tb\nx\t1\t2\n");
        let m = load_expression(f.path(), Orientation::SamplesByGenes).unwrap();
        assert_eq!(m.gene_ids(), &["a", "b"]);
    }

    #[test]
    fn duplicate_gene_rejected() {
        let f = write_tmp("id,TP53,TP53\ns1,1,2\n");
        let err = load_expression(f.path(), Orientation::SamplesByGenes).unwrap_err();
        assert!(err.to_string().contains("duplicate gene identifier"), "{err}");
    }

    #[test]
    fn missing_and_bad_cells_name_position() {
        let f = write_tmp("id,a,b\ns1,1,\n");
        let err = load_expression(f.path(), Orientation::SamplesByGenes).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2") && msg.contains("column 3") && msg.contains("missing"), "{msg}");

        let f = write_tmp("id,a,b\ns1,1,abc\n");
        let err = load_expression(f.path(), Orientation::SamplesByGenes).unwrap_err();
        assert!(err.to_string().contains("non-numeric"), "{err}");
    }

    #[test]
    fn clinical_rows_validated() {
        let ok = write_tmp("sample_id,time,event,label_2016,label_2021\ns1,120.0,1,Astro,Astro\n");
        let t = load_clinical(ok.path()).unwrap();
        assert_eq!(t.records()[0].label_2016, GliomaLabel::Astro);
        assert!(t.records()[0].event);

        let neg = write_tmp("sample_id,time,event,label_2016,label_2021\ns2,-3,0,Astro,Astro\n");
        let err = load_clinical(neg.path()).unwrap_err();
        assert!(err.to_string().contains("negative survival time"), "{err}");

        let bad = write_tmp("sample_id,time,event,label_2016,label_2021\ns3,50,2,GBM,GBM\n");
        let err = load_clinical(bad.path()).unwrap_err();
        assert!(err.to_string().contains("event must be 0 or 1"), "{err}");
    }

    #[test]
    fn labels_default_to_unknown() {
        let f = write_tmp("sample_id,time,event\ns1,10,0\n");
        let t = load_clinical(f.path()).unwrap();
        assert_eq!(t.records()[0].label_2021, GliomaLabel::Unknown);
    }

    fn fixture() -> (ExpressionMatrix, ClinicalTable) {
        let ids: Vec<String> = (1..=5).map(|i| format!("s{i}")).collect();
        let expr = ExpressionMatrix::new(
            ids,
            vec!["g".into()],
            Array2::from_shape_fn((5, 1), |(i, _)| i as f64),
        )
        .unwrap();
        let rec = |id: &str, l16, l21| ClinicalRecord {
            sample_id: id.into(),
            time: 1.0,
            event: true,
            label_2016: l16,
            label_2021: l21,
        };
        use GliomaLabel::*;
        let clin = ClinicalTable::new(vec![
            rec("s4", Astro, Oligo),
            rec("s2", Astro, Oligo),
            rec("s9", Astro, Astro),
            rec("s1", Astro, Gbm),
        ])
        .unwrap();
        (expr, clin)
    }

    #[test]
    fn cohort_is_intersection_in_clinical_order() {
        let (expr, clin) = fixture();
        let c = build_cohort(&expr, &clin, Scheme::Who2016, GliomaType::Astro).unwrap();
        assert_eq!(c.n_samples(), 3);
        assert_eq!(c.expression.sample_ids(), &["s4", "s2", "s1"]);
        assert_eq!(c.expression.values()[[0, 0]], 3.0);

        let again = build_cohort(&c.expression, &c.clinical, Scheme::Who2016, GliomaType::Astro).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn empty_type_is_too_small() {
        let (expr, clin) = fixture();
        let err = build_cohort(&expr, &clin, Scheme::Who2021, GliomaType::Oligo).unwrap_err();
        assert!(matches!(err, Error::CohortTooSmall { found: 2, .. }));
    }

    #[test]
    fn pan_glioma_keeps_all_labeled() {
        let (expr, mut clin) = fixture();
        clin.records.push(ClinicalRecord {
            sample_id: "s5".into(),
            time: 2.0,
            event: false,
            label_2016: GliomaLabel::Unknown,
            label_2021: GliomaLabel::Unknown,
        });
        let c = build_cohort(&expr, &clin, Scheme::Who2021, GliomaType::PanGlioma).unwrap();
        assert_eq!(c.n_samples(), 3);
        let all = build_unlabeled_cohort(&expr, &clin, Scheme::Who2021).unwrap();
        assert_eq!(all.n_samples(), 4);
    }
}
