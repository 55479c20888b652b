use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::binning::Binning;
use crate::error::{argument, state, Error, Result};
use crate::mmc::{estimate_moments, Moments};

/// A binned density as stored in `pdf.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct PdfTable {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub pdf: Vec<f64>,
}

impl PdfTable {
    pub fn from_binning(b: &Binning, pdf: &[f64]) -> Result<Self> {
        if pdf.len() != b.len() {
            return Err(argument("pdf length does not match the binning"));
        }
        Ok(PdfTable {
            lo: (0..b.len()).map(|i| b.lower_edge(i)).collect(),
            hi: (0..b.len()).map(|i| b.upper_edge(i)).collect(),
            pdf: pdf.to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.pdf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pdf.is_empty()
    }

    pub fn binning(&self) -> Result<Binning> {
        let (lo, hi) = match (self.lo.first(), self.hi.last()) {
            (Some(&lo), Some(&hi)) => (lo, hi),
            _ => return Err(argument("empty pdf table")),
        };
        Binning::new(lo, hi, self.len())
    }

    pub fn moments(&self) -> Result<Moments> {
        estimate_moments(&self.pdf, &self.binning()?)
    }

    fn same_bins(&self, other: &PdfTable) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * (self.hi[0] - self.lo[0]);
        self.len() == other.len()
            && self.lo.iter().zip(&other.lo).all(|(a, b)| close(*a, *b))
            && self.hi.iter().zip(&other.hi).all(|(a, b)| close(*a, *b))
    }
}

/// Writes `bin, center, lo, hi, pdf` rows.
pub fn write_pdf<W: Write>(b: &Binning, pdf: &[f64], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let row_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(["bin", "center", "lo", "hi", "pdf"]).map_err(row_err)?;
    for (i, p) in pdf.iter().enumerate() {
        w.write_record([
            i.to_string(),
            b.center(i).to_string(),
            b.lower_edge(i).to_string(),
            b.upper_edge(i).to_string(),
            p.to_string(),
        ])
        .map_err(row_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a `pdf.csv` file, or `<dir>/pdf.csv` when given a run directory.
pub fn read_pdf(path: &Path) -> Result<PdfTable> {
    let file = if path.is_dir() { path.join("pdf.csv") } else { path.to_path_buf() };
    let name = file.display().to_string();
    read_pdf_from(std::fs::File::open(&file)?, &name)
}

fn read_pdf_from<R: Read>(reader: R, name: &str) -> Result<PdfTable> {
    let parse = |reason: String| Error::Parse { path: name.to_string(), reason };
    let mut r = csv::Reader::from_reader(reader);
    let headers = r.headers().map_err(|e| parse(e.to_string()))?.clone();
    let column = |key: &str| headers.iter().position(|h| h == key).ok_or_else(|| parse(format!("missing column {key:?}")));
    let (lo_col, hi_col, pdf_col) = (column("lo")?, column("hi")?, column("pdf")?);
    let mut table = PdfTable { lo: Vec::new(), hi: Vec::new(), pdf: Vec::new() };
    for record in r.records() {
        let record = record.map_err(|e| parse(e.to_string()))?;
        let num = |k: usize| record[k].parse::<f64>().map_err(|e| parse(format!("bad number {:?}: {e}", &record[k])));
        table.lo.push(num(lo_col)?);
        table.hi.push(num(hi_col)?);
        table.pdf.push(num(pdf_col)?);
    }
    if table.is_empty() {
        return Err(parse("no rows".into()));
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinError {
    pub bin: usize,
    pub center: f64,
    pub baseline: f64,
    pub candidate: f64,
    /// `|candidate - baseline| / baseline`, absent where the bin is not compared.
    pub rel_err: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub bins: Vec<BinError>,
    pub compared_bins: usize,
    pub max_rel_err: f64,
    pub avg_rel_err: f64,
    pub baseline_moments: Moments,
    pub candidate_moments: Moments,
    pub baseline_true_evals: Option<u64>,
    pub candidate_true_evals: Option<u64>,
}

/// Per-bin relative errors over every bin where the baseline density is positive.
pub fn compare_pdfs(baseline: &PdfTable, candidate: &PdfTable) -> Result<ComparisonReport> {
    compare_pdfs_above(baseline, candidate, 0.0)
}

/// Like [`compare_pdfs`], restricted to bins whose baseline probability
/// `pdf·Δ` is at least `min_mass`.
pub fn compare_pdfs_above(baseline: &PdfTable, candidate: &PdfTable, min_mass: f64) -> Result<ComparisonReport> {
    if !baseline.same_bins(candidate) {
        return Err(argument("baseline and candidate use different binnings"));
    }
    let mut bins = Vec::with_capacity(baseline.len());
    let mut errors = Vec::new();
    for i in 0..baseline.len() {
        let (b, c) = (baseline.pdf[i], candidate.pdf[i]);
        let mass = b * (baseline.hi[i] - baseline.lo[i]);
        let rel_err = (b > 0.0 && mass >= min_mass).then(|| (c - b).abs() / b);
        if let Some(e) = rel_err {
            errors.push(e);
        }
        bins.push(BinError { bin: i, center: 0.5 * (baseline.lo[i] + baseline.hi[i]), baseline: b, candidate: c, rel_err });
    }
    if errors.is_empty() {
        return Err(state("no bins with positive baseline density to compare"));
    }
    Ok(ComparisonReport {
        bins,
        compared_bins: errors.len(),
        max_rel_err: errors.iter().copied().fold(0.0, f64::max),
        avg_rel_err: errors.iter().sum::<f64>() / errors.len() as f64,
        baseline_moments: baseline.moments()?,
        candidate_moments: candidate.moments()?,
        baseline_true_evals: None,
        candidate_true_evals: None,
    })
}
